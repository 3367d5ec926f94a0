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
#include <cstdio>

#include "icefuse/error.hpp"
#include "icefuse/io.hpp"

namespace icefuse {

namespace {
constexpr const char* kSceneSchema = "icefuse.scene";
constexpr const char* kManifestSchema = "icefuse.dataset";
}  // namespace

void save_scene(const Scene& scene, const SceneConfig& cfg, const std::filesystem::path& path) {
  Container c;
  c.header = {{"schema", kSceneSchema},
              {"format_version", kContainerFormatVersion},
              {"tool_version", tool_version()},
              {"scene_config", to_json(cfg)}};
  c.blocks = {{"sar", scene.sar}, {"mwr", scene.mwr}, {"label", scene.label}};
  write_container(path, c);
}

Scene load_scene(const std::filesystem::path& path, SceneConfig* cfg) {
  const Container c = read_container(path);
  require_version(c.header, kSceneSchema);
  Scene s{c.block("sar"), c.block("mwr"), c.block("label")};
  require(s.sar.rank() == 3 && s.mwr.rank() == 3 && s.label.rank() == 3 && s.label.dim(0) == 1 &&
              s.label.dim(1) == s.sar.dim(1) && s.label.dim(2) == s.sar.dim(2),
          ErrorKind::kData, "scene '" + path.filename().string() + "' has inconsistent shapes");
  if (cfg != nullptr) *cfg = scene_config_from_json(c.header.at("scene_config"));
  return s;
}

SceneConfig dataset_scene_config(const SceneConfig& base, std::uint64_t seed, std::size_t index) {
  SceneConfig cfg = base;
  cfg.seed = SeededRng(seed).derive(index).next_u64();
  return cfg;
}

namespace {

std::string dataset_digest(const std::vector<std::string>& digests) {
  std::string joined;
  for (const auto& d : digests) joined += d + "\n";
  return sha256_hex({reinterpret_cast<const unsigned char*>(joined.data()), joined.size()});
}

}  // namespace

DatasetManifest write_dataset(const std::filesystem::path& dir, const SceneConfig& base, std::size_t count,
                              std::uint64_t seed) {
  require(count >= 1, ErrorKind::kUsage, "need at least one scene");
  base.validate();
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.base_config = base;
  m.seed = seed;
  for (std::size_t i = 0; i < count; ++i) {
    const SceneConfig cfg = dataset_scene_config(base, seed, i);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05zu.icf", i);
    save_scene(generate(cfg), cfg, dir / name);
    m.files.emplace_back(name);
    m.digests.push_back(sha256_file(dir / name));
  }
  m.dataset_id = dataset_digest(m.digests);

  Json scenes = Json::array();
  for (std::size_t i = 0; i < count; ++i) scenes.push_back({{"file", m.files[i]}, {"sha256", m.digests[i]}});
  const Json j = {{"schema", kManifestSchema},
                  {"format_version", kContainerFormatVersion},
                  {"tool_version", tool_version()},
                  {"seed", seed},
                  {"scene_config", to_json(base)},
                  {"dataset_id", m.dataset_id},
                  {"scenes", scenes}};
  write_text_atomic(dir / kManifestName, j.dump(2) + "\n");
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  Json j;
  try {
    j = Json::parse(read_file(dir / kManifestName));
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed dataset manifest: ") + e.what());
  }
  require_version(j, kManifestSchema);
  DatasetManifest m;
  try {
    m.base_config = scene_config_from_json(j.at("scene_config"));
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("scenes")) {
      m.files.push_back(s.at("file").get<std::string>());
      m.digests.push_back(s.at("sha256").get<std::string>());
    }
    m.dataset_id = j.at("dataset_id").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed dataset manifest: ") + e.what());
  }
  require(!m.files.empty(), ErrorKind::kData, "dataset manifest lists no scenes");
  require(dataset_digest(m.digests) == m.dataset_id, ErrorKind::kIntegrity, "dataset id does not match scene digests");
  return m;
}

std::vector<Scene> load_dataset(const std::filesystem::path& dir, DatasetManifest* manifest) {
  DatasetManifest m = read_manifest(dir);
  std::vector<Scene> scenes;
  for (std::size_t i = 0; i < m.files.size(); ++i) {
    const auto path = dir / m.files[i];
    require(sha256_file(path) == m.digests[i], ErrorKind::kIntegrity,
            "scene '" + m.files[i] + "' does not match its manifest digest");
    scenes.push_back(load_scene(path));
  }
  if (manifest != nullptr) *manifest = std::move(m);
  return scenes;
}

}  // namespace icefuse
