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
#include "icefuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icefuse/error.hpp"

namespace icefuse {

namespace {

constexpr double kProbFloor = 1e-15;

void check_loss_inputs(const Tensor& prob, const Tensor& label) {
  require(prob.shape() == label.shape(), ErrorKind::kDimension,
          "prob " + shape_string(prob.shape()) + " and label " + shape_string(label.shape()) + " differ");
  require(!prob.empty(), ErrorKind::kDimension, "empty prediction");
  for (double y : label.values()) {
    require(y == 0.0 || y == 1.0, ErrorKind::kData, "labels must be 0 or 1, got " + std::to_string(y));
  }
}

}  // namespace

LossResult bce_loss(const Tensor& prob, const Tensor& label) {
  check_loss_inputs(prob, label);
  const double n = static_cast<double>(prob.size());
  LossResult res{0.0, Tensor::zeros_like(prob)};
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kProbFloor, 1.0 - kProbFloor);
    const double y = label[i];
    acc -= y == 1.0 ? std::log(p) : std::log1p(-p);
    res.grad_prob[i] = (p - y) / (p * (1.0 - p) * n);
  }
  res.loss = acc / n;
  return res;
}

Tensor bce_grad_logit(const Tensor& prob, const Tensor& label) {
  check_loss_inputs(prob, label);
  const double n = static_cast<double>(prob.size());
  Tensor g = Tensor::zeros_like(prob);
  for (std::size_t i = 0; i < prob.size(); ++i) g[i] = (prob[i] - label[i]) / n;
  return g;
}

void sgd_step(FusionNetwork& net, const ParameterGradients& grads, double learning_rate) {
  auto params = net.params.named_tensors();
  const auto gs = grads.named_tensors();
  require(params.size() == gs.size(), ErrorKind::kUsage, "gradient structure does not match the network");
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t].second;
    const Tensor& g = *gs[t].second;
    require(p.shape() == g.shape(), ErrorKind::kUsage,
            "gradient for " + params[t].first + " has shape " + shape_string(g.shape()) + ", expected " +
                shape_string(p.shape()));
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t].second;
    const Tensor& g = *gs[t].second;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= learning_rate * g[i];
  }
  ++net.revision;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::kConfiguration,
          "learning rate must be finite and positive");
  require(epochs >= 0, ErrorKind::kConfiguration, "epochs must be non-negative");
  require(batch_size >= 1, ErrorKind::kConfiguration, "batch size must be >= 1");
}

namespace {

void accumulate(ParameterGradients& into, const ParameterGradients& g, double weight) {
  auto dst = into.named_tensors();
  const auto src = g.named_tensors();
  for (std::size_t t = 0; t < dst.size(); ++t)
    for (std::size_t i = 0; i < dst[t].second->size(); ++i) (*dst[t].second)[i] += weight * (*src[t].second)[i];
}

}  // namespace

std::vector<double> train(FusionNetwork& net, std::span<const Scene> data, const TrainConfig& cfg) {
  cfg.validate();
  require(!data.empty(), ErrorKind::kUsage, "training needs at least one scene");
  for (const Scene& s : data) {
    require(s.sar.shape() == data[0].sar.shape() && s.mwr.shape() == data[0].mwr.shape(), ErrorKind::kData,
            "scenes in a dataset must share shapes");
  }

  const SeededRng root(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::vector<double> history;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      SeededRng shuffle_rng = root.derive(static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);
    }
    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      const double weight = 1.0 / static_cast<double>(last - first);
      ParameterGradients total = net.params.zeros_like();
      std::vector<ForwardCache> caches;
      for (std::size_t j = first; j < last; ++j) {
        const Scene& scene = data[order[j]];
        const SeededRng dropout_rng = root.derive((std::uint64_t{1} << 32) + step * 1024 + (j - first));
        ForwardResult fr = forward(net, scene.sar, scene.mwr, Mode::kTrain, dropout_rng);
        epoch_loss += bce_loss(fr.prob, scene.label).loss;
        const Tensor g = bce_grad_logit(fr.prob, scene.label);
        accumulate(total, backward_logit(net, fr.cache, g), weight);
        caches.push_back(std::move(fr.cache));
      }
      for (const ForwardCache& c : caches) apply_running_stats(net, c);
      sgd_step(net, total, cfg.learning_rate);
      ++step;
    }
    history.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return history;
}

std::string to_string(GridProvenance p) {
  switch (p) {
    case GridProvenance::kFeatureGrid: return "feature-grid";
    case GridProvenance::kNativeGrid: return "native-grid";
    case GridProvenance::kUpsampledGrid: return "upsampled-grid";
  }
  return "feature-grid";
}

GridProvenance parse_grid_provenance(const std::string& s) {
  if (s == "feature-grid") return GridProvenance::kFeatureGrid;
  if (s == "native-grid") return GridProvenance::kNativeGrid;
  if (s == "upsampled-grid") return GridProvenance::kUpsampledGrid;
  fail(ErrorKind::kData, "unknown grid provenance '" + s + "'");
}

void MomentAccumulator::add(std::span<const double> values) {
  for (double v : values) {
    if (!has_shift_) {
      shift_ = v;
      has_shift_ = true;
    }
    const double d = v - shift_;
    sum_ += d;
    sum_sq_ += d * d;
  }
  count_ += values.size();
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0) return;
  if (!has_shift_) {
    *this = other;
    return;
  }
  // Re-center the other accumulator onto this shift.
  const double delta = other.shift_ - shift_;
  const double n = static_cast<double>(other.count_);
  sum_sq_ += other.sum_sq_ + 2.0 * delta * other.sum_ + n * delta * delta;
  sum_ += other.sum_ + n * delta;
  count_ += other.count_;
}

double MomentAccumulator::mean() const {
  return count_ == 0 ? 0.0 : shift_ + sum_ / static_cast<double>(count_);
}

double MomentAccumulator::variance() const {
  if (count_ == 0) return 0.0;
  const double n = static_cast<double>(count_);
  const double m = sum_ / n;
  return std::max(0.0, sum_sq_ / n - m * m);
}

double MomentAccumulator::stddev() const { return std::sqrt(variance()); }

MixingStats collect_mixing_stats(const FusionNetwork& net, std::span<const Scene> data, BtempGrid btemp_grid) {
  require(!data.empty(), ErrorKind::kUsage, "statistics need at least one scene");
  const std::size_t d = net.mixing_width();
  const InputGroup& btemp = net.groups.back();
  std::vector<MomentAccumulator> acc(d);
  for (const Scene& scene : data) {
    const ForwardResult fr = forward_eval(net, scene.sar, scene.mwr);
    const std::size_t plane = fr.mixing_inputs.dim(1) * fr.mixing_inputs.dim(2);
    for (std::size_t i = 0; i < d; ++i) {
      const bool native = btemp_grid == BtempGrid::kNative && i >= btemp.start;
      if (native) {
        acc[i].add(scene.mwr.plane(i - btemp.start));
      } else {
        acc[i].add({fr.mixing_inputs.data() + i * plane, plane});
      }
    }
  }

  MixingStats stats;
  stats.mean.resize(d);
  stats.sigma.resize(d);
  stats.provenance.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    stats.mean[i] = acc[i].mean();
    stats.sigma[i] = acc[i].stddev();
    stats.provenance[i] = i < btemp.start ? GridProvenance::kFeatureGrid
                          : btemp_grid == BtempGrid::kNative ? GridProvenance::kNativeGrid
                                                             : GridProvenance::kUpsampledGrid;
  }
  stats.pixel_count = acc.front().count();
  stats.native_pixel_count = btemp_grid == BtempGrid::kNative ? acc.back().count() : 0;
  return stats;
}

}  // namespace icefuse
