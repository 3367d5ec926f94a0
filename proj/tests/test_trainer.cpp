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
#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "icefuse/error.hpp"
#include "icefuse/fusion_net.hpp"
#include "icefuse/kernels.hpp"
#include "icefuse/synth.hpp"
#include "icefuse/trainer.hpp"
#include "oracles.hpp"

namespace icefuse {
namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no icefuse::Error thrown";
  return ErrorKind::kIo;
}

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.variant = Variant::kCustom;
  cfg.scale0_width = 3;
  cfg.branch_width = 3;
  cfg.dilation_rates = {2, 4};
  cfg.branch_depth = 2;
  cfg.mwr_channels = 2;
  cfg.mwr_factor = 4;
  return cfg;
}

std::vector<Scene> toy_scenes(std::size_t n, std::uint64_t seed) {
  std::vector<Scene> out;
  for (std::size_t i = 0; i < n; ++i) {
    SceneConfig sc;
    sc.height = 8;
    sc.width = 8;
    sc.mwr_factor = 4;
    sc.mwr_channels = 2;
    sc.blob_scale = 2.0;
    sc.seed = seed + i;
    out.push_back(generate(sc));
  }
  return out;
}

// ---- loss -----------------------------------------------------------------

TEST(BceLoss, HalfProbabilityGivesLnTwo) {
  const Tensor p({1, 2, 2}, 0.5);
  const Tensor y({1, 2, 2}, std::vector<double>{1, 0, 0, 1});
  EXPECT_NEAR(bce_loss(p, y).loss, std::log(2.0), 1e-15);
}

TEST(BceLoss, PerfectPredictionApproachesZero) {
  const Tensor y({1, 1, 4}, std::vector<double>{1, 0, 1, 0});
  Tensor p = y;
  for (double& v : p.values()) v = v == 1.0 ? 1.0 - 1e-12 : 1e-12;
  EXPECT_LT(bce_loss(p, y).loss, 1e-11);
  EXPECT_TRUE(std::isfinite(bce_loss(y, y).loss));
}

TEST(BceLoss, TwoByTwoExample) {
  const Tensor p({1, 2, 2}, std::vector<double>{0.9, 0.1, 0.8, 0.3});
  const Tensor y({1, 2, 2}, std::vector<double>{1, 0, 1, 0});
  const double expected = (-std::log(0.9) - std::log(0.9) - std::log(0.8) - std::log(0.7)) / 4.0;
  EXPECT_NEAR(bce_loss(p, y).loss, expected, 1e-15);
}

TEST(BceLoss, NonBinaryLabelIsDataError) {
  const Tensor p({1, 1, 2}, 0.5);
  const Tensor y({1, 1, 2}, std::vector<double>{1, 0.5});
  EXPECT_EQ(kind_of([&] { bce_loss(p, y); }), ErrorKind::kData);
}

TEST(BceLoss, LogitGradientMatchesFiniteDifferences) {
  SeededRng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logit = oracle::random_tensor({1, 4, 4}, rng, -4, 4);
    Tensor y({1, 4, 4});
    for (double& v : y.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const Tensor g = bce_grad_logit(kernels::sigmoid(logit), y);
    const auto loss = [&] { return bce_loss(kernels::sigmoid(logit), y).loss; };
    for (std::size_t i = 0; i < logit.size(); ++i)
      EXPECT_NEAR(g[i], oracle::central_difference(logit[i], 1e-5, loss), 1e-6);
  }
}

TEST(BceLoss, ProbGradientMatchesFiniteDifferences) {
  SeededRng rng(2);
  Tensor p = oracle::random_tensor({1, 4, 4}, rng, 0.05, 0.95);
  Tensor y({1, 4, 4});
  for (double& v : y.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const LossResult r = bce_loss(p, y);
  const auto loss = [&] { return bce_loss(p, y).loss; };
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_NEAR(r.grad_prob[i], oracle::central_difference(p[i], 1e-7, loss), 1e-6);
}

// ---- sgd ------------------------------------------------------------------

TEST(SgdStep, ZeroLearningRateLeavesNetwork) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  const NetworkParameters before = net.params;
  ParameterGradients g = net.params.zeros_like();
  for (auto& [name, t] : g.named_tensors()) t->fill(3.0);
  sgd_step(net, g, 0.0);
  const auto a = before.named_tensors();
  const auto b = net.params.named_tensors();
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(*a[t].second, *b[t].second) << a[t].first;
}

TEST(SgdStep, ScalarUpdate) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  net.params.mixing_bias[0] = 1.0;
  ParameterGradients g = net.params.zeros_like();
  g.mixing_bias[0] = 2.0;
  sgd_step(net, g, 0.1);
  EXPECT_DOUBLE_EQ(net.params.mixing_bias[0], 0.8);
}

TEST(SgdStep, LeavesRunningStatistics) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  net.norm_state[0][0].running_mean.fill(0.5);
  ParameterGradients g = net.params.zeros_like();
  for (auto& [name, t] : g.named_tensors()) t->fill(1.0);
  sgd_step(net, g, 0.1);
  for (double v : net.norm_state[0][0].running_mean.values()) EXPECT_EQ(v, 0.5);
}

TEST(SgdStep, ShapeMismatchIsUsageError) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  ParameterGradients g = net.params.zeros_like();
  g.mixing_coefficients = Tensor({3});
  EXPECT_EQ(kind_of([&] { sgd_step(net, g, 0.1); }), ErrorKind::kUsage);
}

TEST(SgdStep, SmallStepDecreasesConvexLoss) {
  // Single-pixel network with everything but the mixing layer frozen: the
  // loss is a logistic regression in (coefficients, bias), hence convex.
  ModelConfig cfg = toy_config();
  cfg.mwr_factor = 1;
  FusionNetwork net = build(cfg, SeededRng(3));
  const Tensor sar({2, 1, 1}, std::vector<double>{0.4, -1.2});
  const Tensor mwr({2, 1, 1}, std::vector<double>{1.5, -0.3});
  const Tensor y({1, 1, 1}, 1.0);
  const auto loss = [&] { return bce_loss(forward_eval(net, sar, mwr).prob, y).loss; };
  const double before = loss();
  ParameterGradients g = net.params.zeros_like();
  const Tensor m = forward_eval(net, sar, mwr).mixing_inputs;
  const double p = forward_eval(net, sar, mwr).prob[0];
  for (std::size_t i = 0; i < m.size(); ++i) g.mixing_coefficients[i] = (p - 1.0) * m[i];
  g.mixing_bias[0] = p - 1.0;
  sgd_step(net, g, 0.01);
  EXPECT_LT(loss(), before);
}

// ---- train ----------------------------------------------------------------

TEST(Train, ZeroEpochsIsNoOp) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  const NetworkParameters before = net.params;
  TrainConfig tc;
  tc.epochs = 0;
  EXPECT_TRUE(train(net, toy_scenes(2, 1), tc).empty());
  EXPECT_EQ(net.params.mixing_coefficients, before.mixing_coefficients);
  EXPECT_EQ(net.params.stem[0].weight, before.stem[0].weight);
}

TEST(Train, EmptyDatasetIsUsageError) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  EXPECT_EQ(kind_of([&] { train(net, std::span<const Scene>{}, TrainConfig{}); }), ErrorKind::kUsage);
}

TEST(Train, InvalidConfigRejected) {
  FusionNetwork net = build(toy_config(), SeededRng(1));
  const auto scenes = toy_scenes(1, 1);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  EXPECT_EQ(kind_of([&] { train(net, scenes, tc); }), ErrorKind::kConfiguration);
  tc = {};
  tc.batch_size = 0;
  EXPECT_EQ(kind_of([&] { train(net, scenes, tc); }), ErrorKind::kConfiguration);
}

TEST(Train, IdenticalSeedsGiveIdenticalParameters) {
  const auto scenes = toy_scenes(3, 5);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 17;
  tc.batch_size = 2;
  FusionNetwork a = build(toy_config(), SeededRng(4));
  FusionNetwork b = build(toy_config(), SeededRng(4));
  const auto ha = train(a, scenes, tc);
  const auto hb = train(b, scenes, tc);
  EXPECT_EQ(ha, hb);
  const auto pa = a.params.named_tensors();
  const auto pb = b.params.named_tensors();
  for (std::size_t t = 0; t < pa.size(); ++t) EXPECT_EQ(*pa[t].second, *pb[t].second) << pa[t].first;
  for (std::size_t br = 0; br < a.norm_state.size(); ++br)
    EXPECT_EQ(a.norm_state[br][0].running_var, b.norm_state[br][0].running_var);
}

TEST(Train, SeparableScenesAreLearned) {
  // High-contrast radiometer and unambiguous backscatter. The threshold was
  // fixed from one run of this exact loop and is not tuned afterwards.
  std::vector<Scene> scenes;
  for (std::uint64_t s = 0; s < 8; ++s) {
    SceneConfig sc;
    sc.height = 16;
    sc.width = 16;
    sc.mwr_factor = 4;
    sc.blob_scale = 4.0;
    sc.sar_ambiguity = 0.0;
    sc.mwr_noise = 0.0;
    sc.seed = 100 + s;
    scenes.push_back(generate(sc));
  }
  ModelConfig cfg = ModelConfig::small();
  cfg.mwr_factor = 4;
  FusionNetwork net = build(cfg, SeededRng(1));
  TrainConfig tc;
  tc.epochs = 50;
  tc.learning_rate = 0.05;
  const auto history = train(net, scenes, tc);
  ASSERT_EQ(history.size(), 50u);
  EXPECT_LT(history.back(), 0.35);
  EXPECT_LT(history.back(), history.front());
}

// ---- statistics -----------------------------------------------------------

TEST(MomentAccumulator, ConstantHasExactlyZeroVariance) {
  MomentAccumulator acc;
  const std::vector<double> v(1000, 0.1);
  acc.add(v);
  EXPECT_EQ(acc.variance(), 0.0);
  EXPECT_EQ(acc.mean(), 0.1);
}

TEST(MomentAccumulator, MatchesTwoPassAndMergeAgrees) {
  SeededRng rng(9);
  std::vector<double> a(500), b(700);
  for (double& v : a) v = rng.uniform(10, 12);
  for (double& v : b) v = rng.uniform(-3, 40);
  MomentAccumulator whole;
  whole.add(a);
  whole.add(b);
  MomentAccumulator left, right;
  left.add(a);
  right.add(b);
  left.merge(right);
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const double var = oracle::population_variance(all);
  EXPECT_NEAR(whole.variance(), var, 1e-10 * var);
  EXPECT_NEAR(left.variance(), var, 1e-10 * var);
  EXPECT_EQ(left.count(), 1200u);
}

TEST(MixingStats, ConstantRadiometerChannelHasZeroSigma) {
  const FusionNetwork net = build(toy_config(), SeededRng(1));
  auto scenes = toy_scenes(2, 3);
  for (Scene& s : scenes) std::fill(s.mwr.plane(1).begin(), s.mwr.plane(1).end(), 0.7);
  const MixingStats st = collect_mixing_stats(net, scenes);
  const std::size_t idx = net.group(kBtempGroup).start + 1;
  EXPECT_EQ(st.sigma[idx], 0.0);
  EXPECT_GT(st.sigma[idx - 1], 0.0);
}

TEST(MixingStats, StandardizedRadiometerHasUnitNativeSigma) {
  ModelConfig cfg = ModelConfig::small();
  cfg.mwr_factor = 8;
  const FusionNetwork net = build(cfg, SeededRng(1));
  std::vector<Scene> scenes;
  for (std::uint64_t s = 0; s < 4; ++s) {
    SceneConfig sc;
    sc.seed = s;
    scenes.push_back(generate(sc));
  }
  const MixingStats st = collect_mixing_stats(net, scenes);
  const InputGroup& bt = net.group(kBtempGroup);
  for (std::size_t i = bt.start; i < bt.start + bt.width; ++i) {
    EXPECT_NEAR(st.sigma[i], 1.0, 0.05);
    EXPECT_EQ(st.provenance[i], GridProvenance::kNativeGrid);
  }
  EXPECT_EQ(st.provenance[0], GridProvenance::kFeatureGrid);
  EXPECT_EQ(st.pixel_count, 4u * 64 * 64);
  EXPECT_EQ(st.native_pixel_count, 4u * 8 * 8);
  EXPECT_EQ(st.size(), 84u);
}

TEST(MixingStats, BilinearCheckerShrinksUpsampledSigma) {
  ModelConfig cfg = toy_config();
  const FusionNetwork net = build(cfg, SeededRng(1));
  Scene s = toy_scenes(1, 1).front();
  // 2x2 checker per coarse channel.
  s.mwr = Tensor({2, 2, 2}, std::vector<double>{1, -1, -1, 1, 1, -1, -1, 1});
  const std::vector<Scene> data{s};
  const MixingStats native = collect_mixing_stats(net, data, BtempGrid::kNative);
  const MixingStats upsampled = collect_mixing_stats(net, data, BtempGrid::kUpsampled);
  const std::size_t i = net.group(kBtempGroup).start;
  EXPECT_EQ(native.sigma[i], 1.0);
  EXPECT_LT(upsampled.sigma[i], native.sigma[i]);
  EXPECT_EQ(upsampled.provenance[i], GridProvenance::kUpsampledGrid);
  EXPECT_EQ(upsampled.native_pixel_count, 0u);
}

TEST(MixingStats, NearestUpsamplingKeepsSigma) {
  ModelConfig cfg = toy_config();
  cfg.upsample_mode = UpsampleMode::kNearest;
  const FusionNetwork net = build(cfg, SeededRng(1));
  Scene s = toy_scenes(1, 1).front();
  s.mwr = Tensor({2, 2, 2}, std::vector<double>{1, -1, -1, 1, 2, 0, 0, 2});
  const std::vector<Scene> data{s};
  const std::size_t i = net.group(kBtempGroup).start;
  EXPECT_EQ(collect_mixing_stats(net, data, BtempGrid::kUpsampled).sigma[i],
            collect_mixing_stats(net, data, BtempGrid::kNative).sigma[i]);
}

TEST(MixingStats, SecondPassIsIdentical) {
  const FusionNetwork net = build(toy_config(), SeededRng(2));
  const auto scenes = toy_scenes(3, 8);
  const MixingStats a = collect_mixing_stats(net, scenes);
  const MixingStats b = collect_mixing_stats(net, scenes);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(MixingStats, EmptyDatasetIsUsageError) {
  const FusionNetwork net = build(toy_config(), SeededRng(2));
  EXPECT_EQ(kind_of([&] { collect_mixing_stats(net, std::span<const Scene>{}); }), ErrorKind::kUsage);
}

TEST(GridProvenance, RoundTripsNames) {
  for (GridProvenance p : {GridProvenance::kFeatureGrid, GridProvenance::kNativeGrid, GridProvenance::kUpsampledGrid})
    EXPECT_EQ(parse_grid_provenance(to_string(p)), p);
}

}  // namespace
}  // namespace icefuse
