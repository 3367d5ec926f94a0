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

#include "icefuse/rng.hpp"
#include "icefuse/tensor.hpp"

namespace icefuse {

enum class Mode { kTrain, kEval };
enum class UpsampleMode { kNearest, kBilinear };

// Dense-array numerics used by the fusion network.
//
// Every kernel that parallelizes does so over independent output channels
// (or channel pairs), so each output element is produced by one thread in a
// fixed summation order. Results are bit-identical for any thread count.
namespace kernels {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// "Same"-size dilated convolution with zero padding of ((k-1)/2)*dilation.
//   input [Cin,H,W], kernels [Cout,Cin,k,k] (k odd), bias [Cout] -> [Cout,H,W]
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int dilation);

struct Conv2dGrads {
  Tensor input;    // empty when not requested
  Tensor kernels;
  Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, int dilation,
                            const Tensor& grad_output, bool want_input_grad = true);

// Mean over a d x d window. Odd d is centered; even d covers offsets
// {-d/2, ..., d/2-1}. Border pixels average over the valid part of the window.
Tensor avg_smooth(const Tensor& input, int window);
Tensor avg_smooth_backward(const Tensor& grad_output, int window);

// [C,h,w] -> [C,h*factor,w*factor]. Bilinear interpolates between coarse
// cell centers and clamps at the edges.
Tensor upsample(const Tensor& input, int factor, UpsampleMode mode);

struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]

  static BatchNormState identity(std::size_t channels);
};

struct BatchNormOutput {
  Tensor output;
  Tensor normalized;  // x_hat
  Tensor mean;        // statistics actually used, [C]
  Tensor var;
};

// Input is [N,C,H,W] or [C,H,W] (treated as N = 1). Train mode normalizes by
// population batch statistics over (N,H,W); eval mode uses the running ones.
// Does not touch the state; see update_running_stats.
BatchNormOutput batch_norm_forward(const Tensor& input, const Tensor& scale, const Tensor& shift,
                                   const BatchNormState& state, Mode mode,
                                   double epsilon = kBatchNormEpsilon);

// running <- momentum * running + (1 - momentum) * batch
void update_running_stats(BatchNormState& state, const BatchNormOutput& batch,
                          double momentum = kBatchNormMomentum);

// Forward plus, in train mode, the running-statistics update.
Tensor batch_norm(const Tensor& input, const Tensor& scale, const Tensor& shift, BatchNormState& state,
                  Mode mode, double epsilon = kBatchNormEpsilon);

struct BatchNormGrads {
  Tensor input;
  Tensor scale;
  Tensor shift;
};

// Backward through a train-mode forward.
BatchNormGrads batch_norm_backward(const Tensor& grad_output, const BatchNormOutput& forward,
                                   const Tensor& scale, double epsilon = kBatchNormEpsilon);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_output, const Tensor& input);
Tensor sigmoid(const Tensor& input);

// Inverted-dropout mask: each entry is 0 with probability rate, else 1/(1-rate).
Tensor dropout_mask(const Shape& shape, double rate, SeededRng rng);
Tensor dropout(const Tensor& input, double rate, SeededRng& rng, Mode mode);

void check_rate(double rate);

}  // namespace kernels

// Straightforward single-threaded versions of the heavy kernels. They compute
// every output element independently by direct summation and serve as the
// baseline in tests and benchmarks.
namespace reference {

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int dilation);
kernels::Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, int dilation,
                                     const Tensor& grad_output);
Tensor avg_smooth(const Tensor& input, int window);
Tensor avg_smooth_backward(const Tensor& grad_output, int window);
Tensor upsample(const Tensor& input, int factor, UpsampleMode mode);
kernels::BatchNormOutput batch_norm_forward(const Tensor& input, const Tensor& scale, const Tensor& shift,
                                            const kernels::BatchNormState& state, Mode mode,
                                            double epsilon = kernels::kBatchNormEpsilon);

}  // namespace reference
}  // namespace icefuse
