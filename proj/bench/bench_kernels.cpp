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
// Parallel kernels against the serial per-pixel reference, plus one full
// training step of each network variant.
#include <omp.h>

#include <benchmark/benchmark.h>

#include "icefuse/fusion_net.hpp"
#include "icefuse/kernels.hpp"
#include "icefuse/synth.hpp"
#include "icefuse/trainer.hpp"

namespace icefuse {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  SeededRng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

struct ConvCase {
  Tensor input = random_tensor({14, 64, 64}, 1);
  Tensor kernels = random_tensor({14, 14, 3, 3}, 2);
  Tensor bias = random_tensor({14}, 3);
  Tensor grad = random_tensor({14, 64, 64}, 4);
};

const ConvCase& conv_case() {
  static const ConvCase c;
  return c;
}

void set_flops(benchmark::State& state) {
  state.counters["MAC/s"] = benchmark::Counter(14.0 * 14 * 9 * 64 * 64 * static_cast<double>(state.iterations()),
                                               benchmark::Counter::kIsRate);
}

void BM_Conv2d(benchmark::State& state) {
  const auto& c = conv_case();
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d(c.input, c.kernels, c.bias, d));
  set_flops(state);
}

void BM_Conv2dReference(benchmark::State& state) {
  const auto& c = conv_case();
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d(c.input, c.kernels, c.bias, d));
  set_flops(state);
}

void BM_Conv2dBackward(benchmark::State& state) {
  const auto& c = conv_case();
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_backward(c.input, c.kernels, d, c.grad));
  set_flops(state);
}

void BM_Conv2dKernelGrad(benchmark::State& state) {
  const auto& c = conv_case();
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_backward(c.input, c.kernels, d, c.grad, false));
  set_flops(state);
}

void BM_Conv2dBackwardReference(benchmark::State& state) {
  const auto& c = conv_case();
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_backward(c.input, c.kernels, d, c.grad));
  set_flops(state);
}

void BM_AvgSmooth(benchmark::State& state) {
  const auto& c = conv_case();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::avg_smooth(c.input, static_cast<int>(state.range(0))));
}

void BM_AvgSmoothReference(benchmark::State& state) {
  const auto& c = conv_case();
  for (auto _ : state) benchmark::DoNotOptimize(reference::avg_smooth(c.input, static_cast<int>(state.range(0))));
}

void BM_UpsampleBilinear(benchmark::State& state) {
  const Tensor x = random_tensor({14, 8, 8}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::upsample(x, 8, UpsampleMode::kBilinear));
}

void BM_UpsampleBilinearReference(benchmark::State& state) {
  const Tensor x = random_tensor({14, 8, 8}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(reference::upsample(x, 8, UpsampleMode::kBilinear));
}

void BM_BatchNorm(benchmark::State& state) {
  const auto& c = conv_case();
  const auto s = kernels::BatchNormState::identity(14);
  const Tensor one({14}, 1.0);
  const Tensor zero({14});
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_norm_forward(c.input, one, zero, s, Mode::kTrain));
}

void BM_BatchNormReference(benchmark::State& state) {
  const auto& c = conv_case();
  const auto s = kernels::BatchNormState::identity(14);
  const Tensor one({14}, 1.0);
  const Tensor zero({14});
  for (auto _ : state) benchmark::DoNotOptimize(reference::batch_norm_forward(c.input, one, zero, s, Mode::kTrain));
}

void BM_TrainStep(benchmark::State& state) {
  const Variant v = state.range(0) == 0 ? Variant::kSmall : Variant::kLarge;
  SceneConfig sc;
  ModelConfig cfg = ModelConfig::for_variant(v);
  cfg.mwr_factor = sc.mwr_factor;
  const Scene scene = generate(sc);
  FusionNetwork net = build(cfg, SeededRng(1));
  for (auto _ : state) {
    ForwardResult fwd = forward(net, scene.sar, scene.mwr, Mode::kTrain, SeededRng(2));
    const ParameterGradients g = backward_logit(net, fwd.cache, bce_grad_logit(fwd.prob, scene.label));
    benchmark::DoNotOptimize(g.mixing_bias[0]);
  }
}

BENCHMARK(BM_Conv2d)->Arg(1)->Arg(4)->Arg(16);
BENCHMARK(BM_Conv2dReference)->Arg(1)->Arg(4)->Arg(16);
BENCHMARK(BM_Conv2dBackward)->Arg(1)->Arg(4)->Arg(16);
BENCHMARK(BM_Conv2dKernelGrad)->Arg(1)->Arg(4)->Arg(16);
BENCHMARK(BM_Conv2dBackwardReference)->Arg(1)->Arg(4)->Arg(16);
BENCHMARK(BM_AvgSmooth)->Arg(2)->Arg(16);
BENCHMARK(BM_AvgSmoothReference)->Arg(2)->Arg(16);
BENCHMARK(BM_UpsampleBilinear);
BENCHMARK(BM_UpsampleBilinearReference);
BENCHMARK(BM_BatchNorm);
BENCHMARK(BM_BatchNormReference);
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace icefuse

BENCHMARK_MAIN();
