// Copyright 2026 The icefuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "icefuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "icefuse/error.hpp"
#include "icefuse/rng.hpp"

namespace icefuse {

void SceneConfig::validate() const {
  require(height > 0 && width > 0, ErrorKind::kConfiguration, "scene extents must be positive");
  require(mwr_factor >= 1, ErrorKind::kConfiguration, "mwr factor must be >= 1");
  const auto f = static_cast<std::size_t>(mwr_factor);
  require(height % f == 0 && width % f == 0, ErrorKind::kConfiguration,
          "scene " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by mwr factor " +
              std::to_string(f));
  require(mwr_channels >= 1, ErrorKind::kConfiguration, "mwr_channels must be >= 1");
  require(sar_ambiguity >= 0.0 && sar_ambiguity <= 1.0, ErrorKind::kConfiguration, "sar_ambiguity must lie in [0,1]");
  require(mwr_noise >= 0.0, ErrorKind::kConfiguration, "mwr_noise must be non-negative");
  require(mwr_informative_fraction > 0.0 && mwr_informative_fraction <= 1.0, ErrorKind::kConfiguration,
          "mwr_informative_fraction must lie in (0,1]");
  require(blob_scale > 0.0, ErrorKind::kConfiguration, "blob_scale must be positive");
  require(edge_texture >= 0.0 && class_separation >= 0.0, ErrorKind::kConfiguration,
          "edge texture and class separation must be non-negative");
}

std::size_t SceneConfig::informative_channels() const {
  const auto n = static_cast<std::size_t>(std::lround(mwr_informative_fraction * static_cast<double>(mwr_channels)));
  return std::clamp<std::size_t>(n, 1, mwr_channels);
}

namespace {

// Truncated Gaussian blur along one axis, normalized over the valid part of
// the window.
std::vector<double> blur_axis(const std::vector<double>& src, long rows, long cols, double sigma, bool along_rows) {
  const long n = along_rows ? cols : rows;
  const double reach = std::ceil(3.0 * sigma);
  const long radius = reach >= static_cast<double>(n) ? n : static_cast<long>(reach);
  std::vector<double> weight(static_cast<std::size_t>(radius + 1));
  for (long r = 0; r <= radius; ++r) {
    const double t = static_cast<double>(r) / sigma;
    weight[static_cast<std::size_t>(r)] = std::exp(-0.5 * t * t);
  }
  std::vector<double> out(src.size());
  for (long a = 0; a < (along_rows ? rows : cols); ++a) {
    for (long i = 0; i < n; ++i) {
      double acc = 0.0;
      double norm = 0.0;
      for (long j = std::max(0L, i - radius); j <= std::min(n - 1, i + radius); ++j) {
        const double wt = weight[static_cast<std::size_t>(std::abs(j - i))];
        const long idx = along_rows ? a * cols + j : j * cols + a;
        acc += wt * src[static_cast<std::size_t>(idx)];
        norm += wt;
      }
      const long dst = along_rows ? a * cols + i : i * cols + a;
      out[static_cast<std::size_t>(dst)] = acc / norm;
    }
  }
  return out;
}

}  // namespace

void standardize_channels(Tensor& t) {
  const std::size_t c = t.dim(0);
  const std::size_t n = t.size() / c;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* v = t.data() + ch * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += v[i];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (v[i] - mean) * (v[i] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) v[i] = sd > 0.0 ? (v[i] - mean) / sd : v[i] - mean;
  }
}

Tensor ice_fraction_coarse(const Tensor& label, int factor) {
  require(factor >= 1, ErrorKind::kConfiguration, "factor must be >= 1");
  require(label.rank() == 3 && label.dim(0) == 1, ErrorKind::kDimension, "label must be [1,H,W]");
  const auto f = static_cast<std::size_t>(factor);
  require(label.dim(1) % f == 0 && label.dim(2) % f == 0, ErrorKind::kConfiguration,
          "label grid is not divisible by factor " + std::to_string(f));
  const std::size_t h = label.dim(1) / f;
  const std::size_t w = label.dim(2) / f;
  Tensor out({1, h, w});
  for (std::size_t cy = 0; cy < h; ++cy) {
    for (std::size_t cx = 0; cx < w; ++cx) {
      double count = 0.0;
      for (std::size_t y = cy * f; y < (cy + 1) * f; ++y)
        for (std::size_t x = cx * f; x < (cx + 1) * f; ++x) count += label.at(0, y, x);
      out.at(0, cy, cx) = count / static_cast<double>(f * f);
    }
  }
  return out;
}

SceneTruth generate_with_truth(const SceneConfig& cfg) {
  cfg.validate();
  const SeededRng root(cfg.seed);
  const long H = static_cast<long>(cfg.height);
  const long W = static_cast<long>(cfg.width);
  const std::size_t plane = cfg.height * cfg.width;

  SeededRng label_rng = root.derive(1);
  std::vector<double> field(plane);
  for (double& v : field) v = label_rng.normal();
  field = blur_axis(field, H, W, cfg.blob_scale, true);
  field = blur_axis(field, H, W, cfg.blob_scale, false);

  SceneTruth out;
  Scene& scene = out.scene;
  scene.label = Tensor({1, cfg.height, cfg.width});
  for (std::size_t i = 0; i < plane; ++i) scene.label[i] = field[i] > 0.0 ? 1.0 : 0.0;

  out.ice_fraction = ice_fraction_coarse(scene.label, cfg.mwr_factor);
  const std::size_t h = cfg.height / static_cast<std::size_t>(cfg.mwr_factor);
  const std::size_t w = cfg.width / static_cast<std::size_t>(cfg.mwr_factor);
  scene.mwr = Tensor({cfg.mwr_channels, h, w});
  SeededRng mwr_rng = root.derive(2);
  const std::size_t informative = cfg.informative_channels();
  for (std::size_t m = 0; m < cfg.mwr_channels; ++m) {
    double* dst = scene.mwr.data() + m * h * w;
    if (m < informative) {
      const double gain = 1.0 - 0.5 * static_cast<double>(m) / static_cast<double>(informative);
      for (std::size_t i = 0; i < h * w; ++i) {
        dst[i] = gain * (2.0 * out.ice_fraction[i] - 1.0);
        if (cfg.mwr_noise > 0.0) dst[i] += cfg.mwr_noise * mwr_rng.normal();
      }
    } else {
      for (std::size_t i = 0; i < h * w; ++i) dst[i] = mwr_rng.normal();
    }
  }
  standardize_channels(scene.mwr);

  // Edge texture: central-difference gradient magnitude of the mask, which is
  // the same on both sides of an ice edge.
  std::vector<double> edge(plane);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      const double gx = 0.5 * (scene.label.at(0, y, std::min(x + 1, W - 1)) - scene.label.at(0, y, std::max(x - 1, 0L)));
      const double gy = 0.5 * (scene.label.at(0, std::min(y + 1, H - 1), x) - scene.label.at(0, std::max(y - 1, 0L), x));
      edge[static_cast<std::size_t>(y * W + x)] = std::sqrt(gx * gx + gy * gy);
    }
  }

  scene.sar = Tensor({2, cfg.height, cfg.width});
  SeededRng sar_rng = root.derive(3);
  constexpr double kChannelContrast[2] = {1.0, 0.6};
  constexpr double kTextureSign[2] = {1.0, -1.0};
  const double separation = (1.0 - cfg.sar_ambiguity) * cfg.class_separation;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    double* dst = scene.sar.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = kChannelContrast[ch] * separation * (scene.label[i] - 0.5) + sar_rng.normal() +
               kTextureSign[ch] * cfg.edge_texture * edge[i];
    }
  }
  standardize_channels(scene.sar);
  return out;
}

Scene generate(const SceneConfig& cfg) { return generate_with_truth(cfg).scene; }

}  // namespace icefuse
