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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "icefuse/fusion_net.hpp"
#include "icefuse/synth.hpp"
#include "icefuse/trainer.hpp"
#include "icefuse/zscore.hpp"

namespace icefuse {

using Json = nlohmann::ordered_json;

std::string tool_version();

// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

// Binary container shared by checkpoints and scenes:
//   8 bytes  magic "ICEFUSE\0"
//   8 bytes  header length L, little-endian
//   L bytes  JSON header: schema, format_version, blocks [{name, shape, offset, count}],
//            payload_bytes, payload_sha256, plus schema-specific fields
//   payload  float64 little-endian blocks at the given byte offsets
inline constexpr int kContainerFormatVersion = 1;

struct NamedBlock {
  std::string name;
  Tensor tensor;
};

struct Container {
  Json header;  // schema-specific fields; block table is managed by the writer
  std::vector<NamedBlock> blocks;

  const Tensor& block(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
// Raw bytes of a container, for tests that need to tamper with files.
std::string encode_container(const Container& c);
// Verifies magic, lengths, block table and payload digest. Does not check
// format_version; see require_version.
Container read_container(const std::filesystem::path& path);
void require_version(const Json& header, const std::string& schema);

Json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const Json& j);
Json to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const Json& j);

struct CheckpointInfo {
  std::uint64_t rng_seed = 0;
  Json extra = Json::object();  // training metadata, copied verbatim
};

void save_checkpoint(const FusionNetwork& net, const std::filesystem::path& path, const CheckpointInfo& info = {});
FusionNetwork load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

void save_scene(const Scene& scene, const SceneConfig& cfg, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path, SceneConfig* cfg = nullptr);

struct DatasetManifest {
  SceneConfig base_config;
  std::uint64_t seed = 0;
  std::vector<std::string> files;    // relative to the manifest directory
  std::vector<std::string> digests;  // sha256 of each file
  std::string dataset_id;            // sha256 over the ordered digests
};

inline constexpr const char* kManifestName = "manifest.json";

// Generates scene i with seed derived from (seed, i) and writes it plus a manifest.
DatasetManifest write_dataset(const std::filesystem::path& dir, const SceneConfig& base, std::size_t count,
                              std::uint64_t seed);
DatasetManifest read_manifest(const std::filesystem::path& dir);
// Loads every scene listed in the manifest, verifying digests.
std::vector<Scene> load_dataset(const std::filesystem::path& dir, DatasetManifest* manifest = nullptr);
SceneConfig dataset_scene_config(const SceneConfig& base, std::uint64_t seed, std::size_t index);

// Where a report's numbers came from.
struct ReportProvenance {
  std::string checkpoint_sha256;
  std::string dataset_id;
  std::uint64_t pixel_count = 0;
  std::uint64_t native_pixel_count = 0;
  std::vector<GridProvenance> stats_provenance;
};

struct ReportFile {
  AnalysisReport report;
  ReportProvenance provenance;
  std::size_t top_k = kDefaultTopK;
};

enum class ReportFormat { kJson, kCsv };
ReportFormat parse_report_format(const std::string& s);

Json report_to_json(const ReportFile& file);
ReportFile report_from_json(const Json& j);

// CSV writes two files: the entry table at path and the group-sum table at
// group_table_path(path).
void write_report(const ReportFile& file, const std::filesystem::path& path, ReportFormat format);
ReportFile read_report(const std::filesystem::path& path);
std::filesystem::path group_table_path(const std::filesystem::path& csv_path);

std::string report_entries_csv(const ReportFile& file);
std::string report_groups_csv(const ReportFile& file);
// Long-format table with the ranked z-scores and the group sums.
std::string plot_table_csv(const ReportFile& file);

Json stats_to_json(const MixingStats& stats);
MixingStats stats_from_json(const Json& j);

Json comparison_to_json(const ComparisonReport& cmp, const std::string& small_digest, const std::string& large_digest);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace icefuse
