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

#include "icefuse/tensor.hpp"

namespace icefuse {

// Synthetic paired scene: ambiguous fine-grid backscatter, coarse
// high-contrast radiometer channels and a binary ice mask.
struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  int mwr_factor = 8;
  std::size_t mwr_channels = 14;
  // 0: class means separated by class_separation; 1: identical class means.
  double sar_ambiguity = 0.8;
  double mwr_noise = 0.1;
  double mwr_informative_fraction = 0.5;
  // Gaussian correlation length of the ice mask, in fine pixels. May be +inf.
  double blob_scale = 16.0;
  double edge_texture = 1.0;
  double class_separation = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t informative_channels() const;

  bool operator==(const SceneConfig&) const = default;
};

struct Scene {
  Tensor sar;    // [2,H,W], standardized per channel
  Tensor mwr;    // [M,h,w], standardized per channel
  Tensor label;  // [1,H,W], 1 = ice
};

struct SceneTruth {
  Scene scene;
  Tensor ice_fraction;  // [1,h,w] coarse ice fraction the radiometer channels encode
};

SceneTruth generate_with_truth(const SceneConfig& cfg);
Scene generate(const SceneConfig& cfg);

// Per-cell mean of a binary label.
Tensor ice_fraction_coarse(const Tensor& label, int factor);

// Per-channel zero mean / unit variance in place. Constant channels are only
// centered.
void standardize_channels(Tensor& t);

}  // namespace icefuse
