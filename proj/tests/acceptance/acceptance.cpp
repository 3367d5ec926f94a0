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
// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "icefuse/error.hpp"
#include "icefuse/io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace icefuse;
using testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

bool throws_kind(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

// ---- 1: gradient check ----------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  ModelConfig cfg = ModelConfig::small();
  cfg.mwr_factor = 4;
  FusionNetwork net = build(cfg, SeededRng(3));
  testing::jitter_parameters(net, SeededRng(5));
  SceneConfig sc;
  sc.height = 8;
  sc.width = 8;
  sc.mwr_factor = 4;
  sc.blob_scale = 2.0;
  sc.seed = 3;
  const Scene scene = generate(sc);
  const testing::GradCheckResult r = testing::gradient_check(net, scene, SeededRng(99));
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = r.failures == 0 && r.checked == net.params.parameter_count() && elapsed < 60.0;
  o.detail = std::to_string(r.checked) + " parameters, " + std::to_string(r.failures) + " outside max(1e-6 abs, 1e-4 rel)" +
             (r.failures ? " (worst " + r.worst_name + fmt(" abs %.3g)", r.worst_abs) : std::string()) + ", " +
             std::to_string(r.kink_rechecked) + " kink rechecks, " + fmt("%.1f s (limit 60 s)", elapsed);
  return o;
}

// ---- 2: z-score equations -------------------------------------------------

Outcome equation_suite() {
  bool ok = zscore(2.0, 0.5) == 4.0 && zscore(-1.5, 3.0) == -0.5 && zscore(0.0, 1.0) == 0.0;
  ok = ok && zscore_corrected(0.3, 0.6, 100) == 5.0 && zscore_corrected(1.0, 1.0, 4) == 2.0;
  ok = ok && zscore_corrected(0.7, 0.3, 1) == zscore(0.7, 0.3);
  ok = ok && throws_kind(ErrorKind::kDeadNode, [] { zscore(1.0, 0.0); });
  ok = ok && throws_kind(ErrorKind::kDeadNode, [] { zscore_corrected(1.0, 0.0, 9); });
  const bool exact = ok;

  SeededRng rng(2024);
  double worst = 0.0;
  std::size_t sqrt_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    const double c = rng.uniform(-5, 5);
    const double s = rng.uniform(0.01, 10);
    const double a = rng.uniform(0.1, 10);
    const auto n = 1 + rng.next_u64() % 100000;
    const double z = zscore(c, s);
    const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); };
    worst = std::max({worst, rel(zscore(a * c, s), a * z), rel(zscore(c, a * s), z / a),
                      rel(zscore(a * c, a * s), z)});
    if (zscore_corrected(c, s, n) != std::sqrt(static_cast<double>(n)) * z) ++sqrt_mismatch;
  }
  Outcome o;
  o.pass = exact && worst <= 1e-12 && sqrt_mismatch == 0;
  o.detail = std::string("exact examples ") + (exact ? "ok" : "FAILED") + fmt(", homogeneity worst rel %.2e (limit 1e-12)", worst) +
             ", sqrt(n) relation mismatches " + std::to_string(sqrt_mismatch) + "/1000";
  return o;
}

// ---- 3: architecture ------------------------------------------------------

Outcome table_structure() {
  const std::vector<std::string> names{"scale-0", "scale-2", "scale-4", "scale-8", "scale-16", "btemp"};
  const auto check = [&](Variant v, std::size_t dim, const std::vector<std::size_t>& widths) {
    const FusionNetwork net = build(ModelConfig::for_variant(v), SeededRng(0));
    if (net.mixing_width() != dim || net.groups.size() != widths.size()) return false;
    std::size_t start = 0;
    for (std::size_t g = 0; g < widths.size(); ++g) {
      if (net.groups[g].name != names[g] || net.groups[g].width != widths[g] || net.groups[g].start != start) return false;
      start += widths[g];
    }
    return start == dim;
  };
  const bool small = check(Variant::kSmall, 84, {14, 14, 14, 14, 14, 14});
  const bool large = check(Variant::kLarge, 140, {14, 28, 28, 28, 28, 14});
  return {small && large, std::string("small 84 inputs [14x6] ") + (small ? "ok" : "MISMATCH") +
                              ", large 140 inputs [14,28,28,28,28,14] " + (large ? "ok" : "MISMATCH")};
}

// ---- 4-6: trained runs ----------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  AnalysisReport small;
  AnalysisReport large;
  double small_loss = 0.0;
  double large_loss = 0.0;
};

AnalysisReport train_and_analyze(Variant v, const std::vector<Scene>& data, const SceneConfig& sc, std::uint64_t seed,
                                 double& final_loss) {
  ModelConfig cfg = ModelConfig::for_variant(v);
  cfg.mwr_factor = sc.mwr_factor;
  FusionNetwork net = build(cfg, SeededRng(seed));
  TrainConfig tc;
  tc.seed = seed;
  final_loss = train(net, data, tc).back();
  return analyze(net, collect_mixing_stats(net, data));
}

std::string ranks_line(const std::vector<SeedRun>& runs, bool large, const std::string& group) {
  std::string s;
  for (const auto& r : runs)
    s += (s.empty() ? "" : ",") + std::to_string((large ? r.large : r.small).group_rank(group));
  return "[" + s + "]";
}

bool scale0_leads_images(const AnalysisReport& r) {
  const double s0 = r.group_sum(kScale0Group);
  for (const auto& g : r.groups)
    if (g.name != kScale0Group && g.name != kBtempGroup && r.group_sum(g.name) >= s0) return false;
  return true;
}

// ---- 7: dead node ---------------------------------------------------------

Outcome dead_node() {
  ModelConfig cfg = ModelConfig::large();
  cfg.mixing_activation = Activation::kRelu;
  cfg.mwr_factor = 8;
  FusionNetwork net = build(cfg, SeededRng(2));
  auto& branch = net.params.branches[1];
  ConvLayer& last = branch.convs.back();
  const std::size_t per_out = last.weight.size() / last.weight.dim(0);
  const std::size_t ch = 5;
  for (std::size_t i = 0; i < per_out; ++i) last.weight[ch * per_out + i] = 0.0;
  last.bias[ch] = -0.5;
  branch.norms.back().shift[ch] = -1.0;
  const std::size_t index = net.group(scale_group_name(branch.dilation)).start + ch;

  std::vector<Scene> data;
  for (std::size_t i = 0; i < 4; ++i) data.push_back(generate(dataset_scene_config(SceneConfig{}, 77, i)));
  const MixingStats stats = collect_mixing_stats(net, data);
  const AnalysisReport r = analyze(net, stats);
  const bool only_that = detect_dead(stats) == std::vector<std::size_t>{index} && stats.sigma[index] == 0.0;
  const bool flagged = r.dead_nodes == std::vector<std::size_t>{index} && r.entries[index].dead() &&
                       !r.rank_of(index).has_value() && r.ranking.size() == 139;
  const bool raises = throws_kind(ErrorKind::kDeadNode, [&] { zscore(net.params.mixing_coefficients[index], stats.sigma[index]); });
  return {only_that && flagged && raises, "input " + std::to_string(index) + ": sigma==0 only there " +
                                              (only_that ? "yes" : "NO") + ", flagged and unranked " + (flagged ? "yes" : "NO") +
                                              ", zscore raises dead-node " + (raises ? "yes" : "NO")};
}

// ---- 8: upsampling caveat -------------------------------------------------

Outcome upsampling_caveat() {
  SceneConfig sc;
  Scene s = generate(sc);
  const std::size_t h = sc.height / static_cast<std::size_t>(sc.mwr_factor);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < h; ++x) s.mwr.at(0, y, x) = (x + y) % 2 ? -1.0 : 1.0;
  const std::vector<Scene> data{s};

  ModelConfig cfg = ModelConfig::small();
  cfg.mwr_factor = sc.mwr_factor;
  const FusionNetwork bil = build(cfg, SeededRng(1));
  cfg.upsample_mode = UpsampleMode::kNearest;
  const FusionNetwork near = build(cfg, SeededRng(1));
  const std::size_t i = bil.group(kBtempGroup).start;
  const MixingStats native = collect_mixing_stats(bil, data, BtempGrid::kNative);
  const MixingStats up_bil = collect_mixing_stats(bil, data, BtempGrid::kUpsampled);
  const MixingStats up_near = collect_mixing_stats(near, data, BtempGrid::kUpsampled);
  const MixingStats native_near = collect_mixing_stats(near, data, BtempGrid::kNative);
  const double ratio = up_bil.sigma[i] / native.sigma[i];
  const bool shrink = ratio < 0.8;
  const bool equal = up_near.sigma[i] == native_near.sigma[i];
  const bool lib_refuses = throws_kind(ErrorKind::kProvenance, [&] { analyze(bil, up_bil); });

  TempDir dir("accept-provenance");
  using testing::run_cli;
  const std::string d = "'" + (dir / "data").string() + "'";
  const std::string m = "'" + (dir / "m.ckpt").string() + "'";
  int status = run_cli("gen-data --out " + d + " --scenes 1 --seed 1 --height 16 --width 16 --mwr-factor 4", dir.path()).status;
  if (status == 0) status = run_cli("train --data " + d + " --variant small --epochs 1 --out " + m, dir.path()).status;
  const int analyze_status =
      status == 0 ? run_cli("analyze --ckpt " + m + " --data " + d + " --out '" + (dir / "r.json").string() +
                                "' --btemp-grid upsampled",
                            dir.path())
                        .status
                  : -1;
  return {shrink && equal && lib_refuses && analyze_status == 4,
          fmt("bilinear/native sigma %.3f (limit < 0.8)", ratio) + ", nearest equal " + (equal ? "yes" : "NO") +
              ", upsampled-provenance analyze exit " + std::to_string(analyze_status) + " (expected 4)"};
}

// ---- 9: determinism -------------------------------------------------------

std::string run_pipeline(const TempDir& dir, bool& ok) {
  const auto q = [&](const std::string& f) { return "'" + (dir / f).string() + "'"; };
  const std::vector<std::string> steps{
      "gen-data --out " + q("data") + " --scenes 3 --seed 21 --height 32 --width 32 --mwr-factor 8",
      "train --data " + q("data") + " --variant small --epochs 2 --seed 4 --out " + q("s.ckpt"),
      "train --data " + q("data") + " --variant large --epochs 2 --seed 4 --out " + q("l.ckpt"),
      "analyze --ckpt " + q("s.ckpt") + " --data " + q("data") + " --out " + q("s.json") + " --eq1",
      "analyze --ckpt " + q("l.ckpt") + " --data " + q("data") + " --out " + q("l.csv"),
      "compare --small " + q("s.json") + " --large " + q("l.csv") + " --out " + q("cmp.json"),
      "plot-data --report " + q("s.json") + " --out " + q("plot.csv")};
  for (const auto& s : steps) ok = ok && testing::run_cli(s, dir.path()).status == 0;
  std::string all;
  for (const char* f : {"s.ckpt", "l.ckpt", "s.json", "l.csv", "l.groups.csv", "cmp.json", "plot.csv"})
    all += std::string(f) + "\n" + testing::slurp(dir / f);
  return all;
}

Outcome determinism() {
  TempDir a("accept-det-a");
  TempDir b("accept-det-b");
  bool ok = true;
  const std::string first = run_pipeline(a, ok);
  const std::string second = run_pipeline(b, ok);
  const bool same = first == second;
  return {ok && same, std::string("pipeline exit codes ") + (ok ? "all 0" : "NONZERO") + ", reports " +
                          (same ? "byte-identical" : "DIFFER") + " (" + std::to_string(first.size()) + " bytes)"};
}

// ---- 10: kernel oracles ---------------------------------------------------

Outcome kernel_oracles() {
  SeededRng rng(10);
  int conv_bad = 0, smooth_bad = 0, up_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const Tensor in = oracle::random_integer_tensor({3, 6, 6}, rng);
    for (int d : {1, 2, 4}) {
      const Tensor k = oracle::random_integer_tensor({2, 3, 3, 3}, rng);
      const Tensor bias = oracle::random_integer_tensor({2}, rng);
      if (kernels::conv2d(in, k, bias, d) != oracle::conv2d(in, k, bias, d)) ++conv_bad;
    }
    for (int d : {1, 2, 3})
      if (kernels::avg_smooth(in, d) != oracle::windowed_mean(in, d)) ++smooth_bad;
    for (int f : {2, 4}) {
      if (kernels::upsample(in, f, UpsampleMode::kBilinear) != oracle::bilinear(in, f)) ++up_bad;
      if (kernels::upsample(in, f, UpsampleMode::kNearest) != oracle::nearest(in, f)) ++up_bad;
    }
  }
  return {conv_bad + smooth_bad + up_bad == 0,
          "mismatches over 100 random 6x6 cases: conv2d(d=1,2,4) " + std::to_string(conv_bad) + "/300, avg_smooth(d=1,2,3) " +
              std::to_string(smooth_bad) + "/300, upsample(bilinear,nearest x2,x4) " + std::to_string(up_bad) + "/400"};
}

int failures = 0;

void emit(int id, const char* name, const std::function<Outcome()>& f) {
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %2d %-22s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  emit(1, "gradient-check", gradient_correctness);
  emit(2, "zscore-equations", equation_suite);
  emit(3, "architecture", table_structure);

  // Criteria 4-6 share one set of trained runs.
  std::vector<SeedRun> runs;
  double small_seconds = 0.0;
  std::string run_error;
  try {
    const SceneConfig base;  // ambiguity 0.8, radiometer noise 0.1, edge texture 1.0, 64x64
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::vector<Scene> data;
      for (std::size_t i = 0; i < 8; ++i) data.push_back(generate(dataset_scene_config(base, seed, i)));
      SeedRun r;
      r.seed = seed;
      const auto t0 = Clock::now();
      r.small = train_and_analyze(Variant::kSmall, data, base, seed, r.small_loss);
      small_seconds += seconds_since(t0);
      r.large = train_and_analyze(Variant::kLarge, data, base, seed, r.large_loss);
      std::printf("  seed %llu: small loss %.4f btemp rank %zu scale-0 rank %zu | large loss %.4f btemp rank %zu\n",
                  static_cast<unsigned long long>(seed), r.small_loss, r.small.group_rank(kBtempGroup),
                  r.small.group_rank(kScale0Group), r.large_loss, r.large.group_rank(kBtempGroup));
      std::fflush(stdout);
      runs.push_back(std::move(r));
    }
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  const auto count = [&](const std::function<bool(const SeedRun&)>& pred) {
    int n = 0;
    for (const auto& r : runs) n += pred(r) ? 1 : 0;
    return n;
  };
  emit(4, "mwr-dominance", [&]() -> Outcome {
    if (!run_error.empty()) return {false, "training failed: " + run_error};
    const int n = count([](const SeedRun& r) { return r.small.group_rank(kBtempGroup) == 1; });
    return {n >= 4 && small_seconds < 600.0, "btemp rank 1 in " + std::to_string(n) + "/5 small runs (need 4), ranks " +
                                                 ranks_line(runs, false, kBtempGroup) +
                                                 fmt(", small runs %.0f s (limit 600 s)", small_seconds)};
  });
  emit(5, "scale0-leads-images", [&]() -> Outcome {
    if (!run_error.empty()) return {false, "training failed: " + run_error};
    const int n = count([](const SeedRun& r) { return scale0_leads_images(r.small); });
    return {n >= 4, "scale-0 largest image group in " + std::to_string(n) + "/5 small runs (need 4), scale-0 ranks " +
                        ranks_line(runs, false, kScale0Group)};
  });
  emit(6, "variant-stability", [&]() -> Outcome {
    if (!run_error.empty()) return {false, "training failed: " + run_error};
    const int n = count([](const SeedRun& r) { return compare_variants(r.small, r.large).btemp_stable; });
    return {n >= 4, "btemp rank unchanged in " + std::to_string(n) + "/5 small/large pairs (need 4), large btemp ranks " +
                        ranks_line(runs, true, kBtempGroup)};
  });

  emit(7, "dead-node", dead_node);
  emit(8, "upsampling-variance", upsampling_caveat);
  emit(9, "determinism", determinism);
  emit(10, "kernel-oracles", kernel_oracles);

  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
