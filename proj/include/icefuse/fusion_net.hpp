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
#include <string>
#include <utility>
#include <vector>

#include "icefuse/kernels.hpp"
#include "icefuse/rng.hpp"
#include "icefuse/tensor.hpp"

namespace icefuse {

// kCustom relaxes the fixed small/large group widths; used for toy networks.
enum class Variant { kSmall, kLarge, kCustom };
enum class Activation { kLinear, kRelu };

std::string to_string(Variant v);
std::string to_string(Activation a);
std::string to_string(UpsampleMode m);
Variant parse_variant(const std::string& s);
Activation parse_activation(const std::string& s);
UpsampleMode parse_upsample_mode(const std::string& s);

inline constexpr const char* kScale0Group = "scale-0";
inline constexpr const char* kBtempGroup = "btemp";

// A contiguous block of mixing-layer inputs.
struct InputGroup {
  std::string name;  // "scale-0", "scale-<dilation>" or "btemp"
  std::size_t start = 0;
  std::size_t width = 0;

  bool operator==(const InputGroup&) const = default;
};

std::string scale_group_name(int dilation);

struct ModelConfig {
  Variant variant = Variant::kSmall;
  std::size_t scale0_width = 14;  // stem output = Scale-0 tap
  std::size_t branch_width = 14;  // output width of every dilated branch
  std::vector<int> dilation_rates{2, 4, 8, 16};
  int kernel_size = 3;
  int stem_depth = 2;
  int branch_depth = 6;  // convolutions per branch, consumed in pairs
  double dropout_rate = 0.1;
  Activation mixing_activation = Activation::kLinear;
  UpsampleMode upsample_mode = UpsampleMode::kBilinear;
  std::size_t sar_channels = 2;
  std::size_t mwr_channels = 14;
  int mwr_factor = 16;

  static ModelConfig small();
  static ModelConfig large();
  static ModelConfig for_variant(Variant v);

  // Throws ErrorKind::kConfiguration when an invariant is violated.
  void validate() const;

  // Six groups for the default dilation rates, in mixing-input order:
  // scale-0, scale-<d> for each dilation rate, btemp.
  std::vector<InputGroup> groups() const;
  std::size_t mixing_width() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ConvLayer {
  Tensor weight;  // [Cout,Cin,k,k]
  Tensor bias;    // [Cout]
};

struct NormLayer {
  Tensor scale;  // [C]
  Tensor shift;  // [C]
};

struct BranchParameters {
  int dilation = 1;
  std::vector<ConvLayer> convs;  // branch_depth entries
  std::vector<NormLayer> norms;  // one per conv pair
};

// Every learnable tensor of the network. Also used, zero-initialized, as the
// gradient container.
struct NetworkParameters {
  std::vector<ConvLayer> stem;
  std::vector<BranchParameters> branches;
  Tensor mixing_coefficients;  // [D]
  Tensor mixing_bias;          // [1]

  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  NetworkParameters zeros_like() const;
  std::size_t parameter_count() const;
};

using ParameterGradients = NetworkParameters;

struct FusionNetwork {
  ModelConfig config;
  std::vector<InputGroup> groups;
  NetworkParameters params;
  // Running statistics, [branch][pair]. Not learnable; updated by train-mode
  // forward passes through apply_running_stats.
  std::vector<std::vector<kernels::BatchNormState>> norm_state;
  // Bumped whenever parameters change, so stale forward caches are detected.
  std::uint64_t revision = 0;

  std::size_t mixing_width() const { return params.mixing_coefficients.size(); }
  const InputGroup& group(const std::string& name) const;
};

FusionNetwork build(const ModelConfig& config, const SeededRng& rng);

struct PairCache {
  Tensor input;      // input of the first convolution
  Tensor mid;        // output of the first convolution
  Tensor pre_relu;   // output of the second convolution
  kernels::BatchNormOutput norm;
  Tensor dropout_mask;
};

struct BranchCache {
  Tensor smoothed;
  std::vector<PairCache> pairs;
  Tensor pre_activation;  // input of the mixing activation
};

struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::kEval;
  std::uint64_t revision = 0;
  std::vector<Tensor> stem_inputs;
  Tensor stem_output;
  std::vector<BranchCache> branches;
  Tensor mixing_inputs;
  Tensor prob;
};

struct ForwardResult {
  Tensor prob;           // [1,H,W]
  Tensor mixing_inputs;  // [D,H,W]
  ForwardCache cache;
};

// sar [sar_channels,H,W], mwr [mwr_channels,h,w] with H = h*mwr_factor.
// Does not modify the network; train-mode batch statistics are returned in
// the cache and folded into the running statistics by apply_running_stats.
ForwardResult forward(const FusionNetwork& net, const Tensor& sar, const Tensor& mwr, Mode mode,
                      const SeededRng& rng);

// Forward without keeping intermediate activations.
ForwardResult forward_eval(const FusionNetwork& net, const Tensor& sar, const Tensor& mwr);

void apply_running_stats(FusionNetwork& net, const ForwardCache& cache);

// Stem output (the Scale-0 block) alone.
Tensor stem_forward(const FusionNetwork& net, const Tensor& sar);

// Output of one dilated branch (after the mixing activation) given the stem
// output; uses the same dropout streams as forward.
Tensor branch_forward(const FusionNetwork& net, std::size_t branch, const Tensor& stem_output, Mode mode,
                      const SeededRng& rng);

// Gradients of all parameters given d(loss)/d(prob).
ParameterGradients backward(const FusionNetwork& net, const ForwardCache& cache, const Tensor& grad_prob);

// Same, starting from d(loss)/d(logit); avoids dividing by p(1-p) when the
// loss is binary cross-entropy.
ParameterGradients backward_logit(const FusionNetwork& net, const ForwardCache& cache, const Tensor& grad_logit);

}  // namespace icefuse
