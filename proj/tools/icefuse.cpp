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
// Command-line driver: gen-data -> train -> analyze -> compare / plot-data.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "icefuse/error.hpp"
#include "icefuse/io.hpp"

namespace fs = std::filesystem;
using namespace icefuse;

namespace {

struct GenDataArgs {
  fs::path out;
  std::size_t scenes = 8;
  std::uint64_t seed = 0;
  SceneConfig scene;
};

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path log;
  std::string variant = "small";
  std::string mixing_activation = "linear";
  std::string upsample_mode = "bilinear";
  double dropout = 0.1;
  TrainConfig train;
};

struct AnalyzeArgs {
  fs::path ckpt;
  fs::path data;
  fs::path out;
  fs::path stats_in;
  fs::path stats_out;
  std::string format;
  std::string btemp_grid = "native";
  std::size_t top_k = kDefaultTopK;
  bool eq1 = false;
  std::uint64_t n = 0;
  double dead_tolerance = kDeadTolerance;
};

struct CompareArgs {
  fs::path small;
  fs::path large;
  fs::path out;
  std::size_t top_k = kDefaultTopK;
};

struct PlotArgs {
  fs::path report;
  fs::path out;
};

void warn(std::string_view code, const std::string& message) {
  std::cerr << "warning: code=" << code << " message=" << message << "\n";
}

int run_gen_data(const GenDataArgs& a) {
  const DatasetManifest m = write_dataset(a.out, a.scene, a.scenes, a.seed);
  std::cout << "wrote " << m.files.size() << " scenes to " << a.out.string() << " (dataset " << m.dataset_id.substr(0, 12)
            << ")\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  DatasetManifest manifest;
  const std::vector<Scene> data = load_dataset(a.data, &manifest);
  ModelConfig cfg = ModelConfig::for_variant(parse_variant(a.variant));
  cfg.mixing_activation = parse_activation(a.mixing_activation);
  cfg.upsample_mode = parse_upsample_mode(a.upsample_mode);
  cfg.dropout_rate = a.dropout;
  cfg.mwr_factor = manifest.base_config.mwr_factor;
  require(manifest.base_config.mwr_channels == cfg.mwr_channels, ErrorKind::kData,
          "dataset has " + std::to_string(manifest.base_config.mwr_channels) + " radiometer channels, the " + a.variant +
              " model expects " + std::to_string(cfg.mwr_channels));

  FusionNetwork net = build(cfg, SeededRng(a.train.seed));
  const std::vector<double> history = train(net, data, a.train);

  CheckpointInfo info;
  info.rng_seed = a.train.seed;
  info.extra = {{"dataset_id", manifest.dataset_id},
                {"train_config",
                 {{"learning_rate", a.train.learning_rate},
                  {"epochs", a.train.epochs},
                  {"batch_size", a.train.batch_size},
                  {"seed", a.train.seed},
                  {"shuffle", a.train.shuffle}}},
                {"history", history}};
  save_checkpoint(net, a.out, info);

  std::string log = "# icefuse " + tool_version() + " dataset=" + manifest.dataset_id + "\nepoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) log += std::to_string(e + 1) + "," + format_double(history[e]) + "\n";
  fs::path log_path = a.log;
  if (log_path.empty()) {
    log_path = a.out;
    log_path += ".log.csv";
  }
  write_text_atomic(log_path, log);
  std::cout << "trained " << a.variant << " model for " << history.size() << " epochs";
  if (!history.empty()) std::cout << ", final loss " << format_double(history.back());
  std::cout << "\n";
  return 0;
}

int run_analyze(const AnalyzeArgs& a) {
  const FusionNetwork net = load_checkpoint(a.ckpt);
  DatasetManifest manifest;
  MixingStats stats;
  if (!a.stats_in.empty()) {
    manifest = read_manifest(a.data);
    try {
      stats = stats_from_json(Json::parse(read_file(a.stats_in)));
    } catch (const Json::exception& e) {
      fail(ErrorKind::kData, std::string("malformed statistics file: ") + e.what());
    }
  } else {
    const std::vector<Scene> data = load_dataset(a.data, &manifest);
    BtempGrid grid = BtempGrid::kNative;
    if (a.btemp_grid == "upsampled") {
      grid = BtempGrid::kUpsampled;
    } else {
      require(a.btemp_grid == "native", ErrorKind::kUsage, "--btemp-grid must be native or upsampled");
    }
    stats = collect_mixing_stats(net, data, grid);
  }
  if (!a.stats_out.empty()) write_text_atomic(a.stats_out, stats_to_json(stats).dump(2) + "\n");

  AnalyzeOptions opts;
  opts.dead_tolerance = a.dead_tolerance;
  if (a.eq1) opts.corrected_n = a.n > 0 ? a.n : stats.pixel_count;

  ReportFile file;
  file.report = analyze(net, stats, opts);
  file.top_k = a.top_k;
  file.provenance = {sha256_file(a.ckpt), manifest.dataset_id, stats.pixel_count, stats.native_pixel_count,
                     stats.provenance};

  if (!file.report.dead_nodes.empty()) {
    std::string list;
    for (auto i : file.report.dead_nodes) list += (list.empty() ? "" : ",") + std::to_string(i);
    warn("dead-node", std::to_string(file.report.dead_nodes.size()) +
                          " zero-variance mixing input(s) excluded from ranking: " + list);
  }
  if (top_k(file.report, a.top_k).truncated) {
    warn("top-k-truncated", "only " + std::to_string(file.report.ranking.size()) + " live inputs for top-" +
                                std::to_string(a.top_k));
  }

  std::string format = a.format;
  if (format.empty()) format = a.out.extension() == ".csv" ? "csv" : "json";
  write_report(file, a.out, parse_report_format(format));
  const auto& r = file.report;
  const auto ranks = r.group_ranks();
  const auto top = static_cast<std::size_t>(std::min_element(ranks.begin(), ranks.end()) - ranks.begin());
  std::cout << "analyzed " << r.entries.size() << " mixing inputs; top group " << r.groups[top].name << "\n";
  return 0;
}

int run_compare(const CompareArgs& a) {
  const ReportFile small = read_report(a.small);
  const ReportFile large = read_report(a.large);
  const ComparisonReport cmp = compare_variants(small.report, large.report, a.top_k);
  write_text_atomic(a.out, comparison_to_json(cmp, sha256_file(a.small), sha256_file(a.large)).dump(2) + "\n");
  std::cout << "btemp rank " << (cmp.btemp_stable ? "stable" : "changed") << ", " << cmp.group_rank_inversions
            << " group-rank inversion(s)\n";
  return 0;
}

int run_plot(const PlotArgs& a) {
  const ReportFile file = read_report(a.report);
  write_text_atomic(a.out, plot_table_csv(file));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor-fusion network training and mixing-layer z-score analysis"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--scenes", gen.scenes, "Number of scenes")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->required();
  gen_cmd->add_option("--height", gen.scene.height, "Fine-grid height")->capture_default_str();
  gen_cmd->add_option("--width", gen.scene.width, "Fine-grid width")->capture_default_str();
  gen_cmd->add_option("--mwr-factor", gen.scene.mwr_factor, "Fine pixels per radiometer cell")->capture_default_str();
  gen_cmd->add_option("--sar-ambiguity", gen.scene.sar_ambiguity, "0 separable .. 1 ambiguous")->capture_default_str();
  gen_cmd->add_option("--mwr-noise", gen.scene.mwr_noise, "Radiometer noise scale")->capture_default_str();
  gen_cmd->add_option("--blob-scale", gen.scene.blob_scale, "Ice mask correlation length")->capture_default_str();
  gen_cmd->add_option("--edge-texture", gen.scene.edge_texture, "Edge texture amplitude")->capture_default_str();
  gen_cmd->add_option("--class-separation", gen.scene.class_separation, "Backscatter class-mean gap at ambiguity 0")
      ->capture_default_str();
  gen_cmd->add_option("--informative-fraction", gen.scene.mwr_informative_fraction,
                      "Fraction of radiometer channels tied to ice")
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a fusion network");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--variant", tr.variant, "small or large")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", tr.train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", tr.train.learning_rate, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--seed", tr.train.seed, "Initialization / shuffling seed")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.train.batch_size, "Scenes per step")->capture_default_str();
  train_cmd->add_option("--mixing-activation", tr.mixing_activation, "linear or relu")->capture_default_str();
  train_cmd->add_option("--upsample-mode", tr.upsample_mode, "bilinear or nearest")->capture_default_str();
  train_cmd->add_option("--dropout", tr.dropout, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--log", tr.log, "Training log path (default: <out>.log.csv)");

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Z-score analysis of the mixing layer");
  analyze_cmd->add_option("--ckpt", an.ckpt, "Checkpoint")->required();
  analyze_cmd->add_option("--data", an.data, "Dataset directory")->required();
  analyze_cmd->add_option("--out", an.out, "Report path (.json or .csv)")->required();
  analyze_cmd->add_option("--format", an.format, "json or csv (default: from extension)");
  analyze_cmd->add_option("--top-k", an.top_k, "Rows in the ranking section")->capture_default_str();
  analyze_cmd->add_flag("--eq1", an.eq1, "Also report sqrt(n)-corrected z-scores");
  analyze_cmd->add_option("--n", an.n, "Sample count for --eq1 (default: analyzed pixels)");
  analyze_cmd->add_option("--stats", an.stats_in, "Use precomputed statistics instead of a forward pass");
  analyze_cmd->add_option("--stats-out", an.stats_out, "Write the statistics used");
  analyze_cmd->add_option("--btemp-grid", an.btemp_grid, "native or upsampled")->capture_default_str();
  analyze_cmd->add_option("--dead-tolerance", an.dead_tolerance, "Max sigma of a dead input")->capture_default_str();

  CompareArgs cmp;
  auto* compare_cmd = app.add_subcommand("compare", "Compare small and large variant reports");
  compare_cmd->add_option("--small", cmp.small, "Small-variant report")->required();
  compare_cmd->add_option("--large", cmp.large, "Large-variant report")->required();
  compare_cmd->add_option("--out", cmp.out, "Comparison output")->required();
  compare_cmd->add_option("--top-k", cmp.top_k, "Entries considered for order inversions")->capture_default_str();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot-data", "Emit a plot-ready table from a report");
  plot_cmd->add_option("--report", plot.report, "Report file")->required();
  plot_cmd->add_option("--out", plot.out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: code=usage message=" << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*analyze_cmd) return run_analyze(an);
    if (*compare_cmd) return run_compare(cmp);
    if (*plot_cmd) return run_plot(plot);
  } catch (const Error& e) {
    std::cerr << "error: code=" << error_code(e.kind()) << " message=" << e.what() << "\n";
    return exit_status(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: code=io message=" << e.what() << "\n";
    return 3;
  }
  return 2;
}
