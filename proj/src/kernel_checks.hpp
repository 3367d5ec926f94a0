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
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "icefuse/error.hpp"
#include "icefuse/kernels.hpp"

namespace icefuse::kernels::detail {

struct ConvGeometry {
  long cin, cout, h, w, k, radius, dilation;
};

inline ConvGeometry check_conv(const Tensor& input, const Tensor& kernels, const Tensor* bias, int dilation) {
  require(input.rank() == 3, ErrorKind::kDimension, "conv2d input must be [Cin,H,W], got " + shape_string(input.shape()));
  require(kernels.rank() == 4, ErrorKind::kDimension,
          "conv2d kernels must be [Cout,Cin,k,k], got " + shape_string(kernels.shape()));
  require(kernels.dim(2) == kernels.dim(3), ErrorKind::kConfiguration, "conv2d kernels must be square");
  require(kernels.dim(2) % 2 == 1, ErrorKind::kConfiguration,
          "conv2d kernel size must be odd, got " + std::to_string(kernels.dim(2)));
  require(dilation >= 1, ErrorKind::kConfiguration, "dilation must be >= 1, got " + std::to_string(dilation));
  require(kernels.dim(1) == input.dim(0), ErrorKind::kDimension,
          "conv2d channel mismatch: input has " + std::to_string(input.dim(0)) + ", kernels expect " +
              std::to_string(kernels.dim(1)));
  if (bias != nullptr) {
    require(bias->size() == kernels.dim(0), ErrorKind::kDimension, "conv2d bias length must equal Cout");
  }
  const long k = static_cast<long>(kernels.dim(2));
  return {static_cast<long>(input.dim(0)), static_cast<long>(kernels.dim(0)), static_cast<long>(input.dim(1)),
          static_cast<long>(input.dim(2)),  k,                                  (k - 1) / 2,
          dilation};
}

// Output indices y in [first, second) whose tap y + offset lies inside [0, n).
inline std::pair<long, long> valid_range(long n, long offset) {
  return {std::max(0L, -offset), std::min(n, n - offset)};
}

inline void check_window(const Tensor& input, int window) {
  require(window >= 1, ErrorKind::kConfiguration, "smoothing window must be >= 1, got " + std::to_string(window));
  require(input.rank() == 3, ErrorKind::kDimension, "avg_smooth expects [C,H,W]");
}

inline long window_count(long i, long n, long lo, long hi) {
  return std::min(n - 1, i + hi) - std::max(0L, i + lo) + 1;
}

struct LerpTap {
  long lo;
  long hi;
  double frac;
};

// Fine index j maps to coarse coordinate (j + 0.5) / f - 0.5, clamped to [0, n-1].
inline std::vector<LerpTap> lerp_taps(long n, long f) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(n * f));
  for (long j = 0; j < n * f; ++j) {
    double u = (static_cast<double>(j) + 0.5) / static_cast<double>(f) - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    const long lo = static_cast<long>(std::floor(u));
    const long hi = std::min(lo + 1, n - 1);
    taps[static_cast<std::size_t>(j)] = {lo, hi, u - static_cast<double>(lo)};
  }
  return taps;
}

struct NormGeometry {
  long n, c, hw;
};

inline NormGeometry check_norm(const Tensor& input, const Tensor& scale, const Tensor& shift,
                               const BatchNormState& state, Mode mode, double epsilon) {
  require(input.rank() == 3 || input.rank() == 4, ErrorKind::kDimension, "batch_norm expects [N,C,H,W] or [C,H,W]");
  require(epsilon > 0.0, ErrorKind::kConfiguration, "batch_norm epsilon must be positive");
  const bool batched = input.rank() == 4;
  const long n = batched ? static_cast<long>(input.dim(0)) : 1;
  const long c = static_cast<long>(input.dim(batched ? 1 : 0));
  const long hw = static_cast<long>(input.size()) / (n * c);
  const auto cc = static_cast<std::size_t>(c);
  require(scale.size() == cc && shift.size() == cc && state.running_mean.size() == cc && state.running_var.size() == cc,
          ErrorKind::kDimension, "batch_norm parameter length must equal channel count");
  if (mode == Mode::kTrain) {
    require(n * hw >= 2, ErrorKind::kDegenerateStatistics,
            "train-mode batch_norm needs at least two values per channel");
  }
  return {n, c, hw};
}

}  // namespace icefuse::kernels::detail
