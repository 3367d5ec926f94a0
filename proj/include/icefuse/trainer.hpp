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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icefuse/fusion_net.hpp"
#include "icefuse/synth.hpp"

namespace icefuse {

struct LossResult {
  double loss = 0.0;
  Tensor grad_prob;
};

// Mean binary cross-entropy over pixels and its gradient w.r.t. prob.
LossResult bce_loss(const Tensor& prob, const Tensor& label);

// (p - y) / N: the gradient of the mean cross-entropy w.r.t. the logits.
Tensor bce_grad_logit(const Tensor& prob, const Tensor& label);

// p <- p - learning_rate * g for every learnable tensor.
void sgd_step(FusionNetwork& net, const ParameterGradients& grads, double learning_rate);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 30;
  int batch_size = 1;  // scenes per step; each scene is its own normalization batch
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

// Mean training loss per epoch.
std::vector<double> train(FusionNetwork& net, std::span<const Scene> data, const TrainConfig& cfg);

enum class GridProvenance { kFeatureGrid, kNativeGrid, kUpsampledGrid };

std::string to_string(GridProvenance p);
GridProvenance parse_grid_provenance(const std::string& s);

// Population mean / standard deviation of every mixing-layer input.
struct MixingStats {
  std::vector<double> mean;
  std::vector<double> sigma;
  std::vector<GridProvenance> provenance;
  std::uint64_t pixel_count = 0;         // fine-grid pixels per feature input
  std::uint64_t native_pixel_count = 0;  // coarse cells per native-grid btemp input

  std::size_t size() const { return sigma.size(); }
};

enum class BtempGrid { kNative, kUpsampled };

// Eval-mode statistics. Scale groups are measured on the fine grid; btemp
// inputs on the coarse radiometer grid before upsampling unless kUpsampled
// is requested.
MixingStats collect_mixing_stats(const FusionNetwork& net, std::span<const Scene> data,
                                 BtempGrid btemp_grid = BtempGrid::kNative);

// Streaming population moments, shifted by the first sample so constant
// inputs give exactly zero variance.
class MomentAccumulator {
 public:
  void add(std::span<const double> values);
  void merge(const MomentAccumulator& other);
  std::uint64_t count() const { return count_; }
  double mean() const;
  double variance() const;
  double stddev() const;

 private:
  bool has_shift_ = false;
  double shift_ = 0.0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
  std::uint64_t count_ = 0;
};

}  // namespace icefuse
