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
#include <limits>

#include "icefuse/error.hpp"
#include "icefuse/io.hpp"

namespace icefuse {

namespace {
constexpr const char* kCheckpointSchema = "icefuse.checkpoint";

std::string norm_block(int dilation, std::size_t pair, const char* which) {
  return "norm.d" + std::to_string(dilation) + "." + std::to_string(pair) + "." + which;
}
}  // namespace

Json to_json(const ModelConfig& cfg) {
  return {{"variant", to_string(cfg.variant)},
          {"group_widths", {{"scale-0", cfg.scale0_width}, {"branch", cfg.branch_width}, {"btemp", cfg.mwr_channels}}},
          {"dilation_rates", cfg.dilation_rates},
          {"kernel_size", cfg.kernel_size},
          {"stem_depth", cfg.stem_depth},
          {"branch_depth", cfg.branch_depth},
          {"dropout_rate", cfg.dropout_rate},
          {"mixing_activation", to_string(cfg.mixing_activation)},
          {"upsample_mode", to_string(cfg.upsample_mode)},
          {"sar_channels", cfg.sar_channels},
          {"mwr_channels", cfg.mwr_channels},
          {"mwr_factor", cfg.mwr_factor}};
}

ModelConfig model_config_from_json(const Json& j) {
  try {
    ModelConfig cfg;
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.scale0_width = j.at("group_widths").at("scale-0").get<std::size_t>();
    cfg.branch_width = j.at("group_widths").at("branch").get<std::size_t>();
    cfg.dilation_rates = j.at("dilation_rates").get<std::vector<int>>();
    cfg.kernel_size = j.at("kernel_size").get<int>();
    cfg.stem_depth = j.at("stem_depth").get<int>();
    cfg.branch_depth = j.at("branch_depth").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.mixing_activation = parse_activation(j.at("mixing_activation").get<std::string>());
    cfg.upsample_mode = parse_upsample_mode(j.at("upsample_mode").get<std::string>());
    cfg.sar_channels = j.at("sar_channels").get<std::size_t>();
    cfg.mwr_channels = j.at("mwr_channels").get<std::size_t>();
    cfg.mwr_factor = j.at("mwr_factor").get<int>();
    return cfg;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed model config: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kData, std::string("malformed model config: ") + e.what());
  }
}

Json to_json(const SceneConfig& cfg) {
  Json j = {{"height", cfg.height},
            {"width", cfg.width},
            {"mwr_factor", cfg.mwr_factor},
            {"mwr_channels", cfg.mwr_channels},
            {"sar_ambiguity", cfg.sar_ambiguity},
            {"mwr_noise", cfg.mwr_noise},
            {"mwr_informative_fraction", cfg.mwr_informative_fraction},
            {"blob_scale", nullptr},
            {"edge_texture", cfg.edge_texture},
            {"class_separation", cfg.class_separation},
            {"seed", cfg.seed}};
  // JSON has no infinity; null stands for an unbounded correlation length.
  if (std::isfinite(cfg.blob_scale)) j["blob_scale"] = cfg.blob_scale;
  return j;
}

SceneConfig scene_config_from_json(const Json& j) {
  try {
    SceneConfig cfg;
    cfg.height = j.at("height").get<std::size_t>();
    cfg.width = j.at("width").get<std::size_t>();
    cfg.mwr_factor = j.at("mwr_factor").get<int>();
    cfg.mwr_channels = j.at("mwr_channels").get<std::size_t>();
    cfg.sar_ambiguity = j.at("sar_ambiguity").get<double>();
    cfg.mwr_noise = j.at("mwr_noise").get<double>();
    cfg.mwr_informative_fraction = j.at("mwr_informative_fraction").get<double>();
    cfg.blob_scale = j.at("blob_scale").is_null() ? std::numeric_limits<double>::infinity()
                                                  : j.at("blob_scale").get<double>();
    cfg.edge_texture = j.at("edge_texture").get<double>();
    cfg.class_separation = j.at("class_separation").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed scene config: ") + e.what());
  }
}

void save_checkpoint(const FusionNetwork& net, const std::filesystem::path& path, const CheckpointInfo& info) {
  Container c;
  c.header = {{"schema", kCheckpointSchema},
              {"format_version", kContainerFormatVersion},
              {"tool_version", tool_version()},
              {"model_config", to_json(net.config)},
              {"rng_seed", info.rng_seed},
              {"extra", info.extra}};
  for (const auto& [name, t] : net.params.named_tensors()) c.blocks.push_back({name, *t});
  for (std::size_t b = 0; b < net.norm_state.size(); ++b) {
    const int d = net.params.branches[b].dilation;
    for (std::size_t p = 0; p < net.norm_state[b].size(); ++p) {
      c.blocks.push_back({norm_block(d, p, "running_mean"), net.norm_state[b][p].running_mean});
      c.blocks.push_back({norm_block(d, p, "running_var"), net.norm_state[b][p].running_var});
    }
  }
  write_container(path, c);
}

FusionNetwork load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  const Container c = read_container(path);
  require_version(c.header, kCheckpointSchema);
  const ModelConfig cfg = model_config_from_json(c.header.at("model_config"));
  const auto seed = c.header.value("rng_seed", std::uint64_t{0});
  FusionNetwork net = build(cfg, SeededRng(seed));

  std::size_t expected = 0;
  for (auto& [name, t] : net.params.named_tensors()) {
    const Tensor& src = c.block(name);
    require(src.shape() == t->shape(), ErrorKind::kIntegrity,
            "block '" + name + "' has shape " + shape_string(src.shape()) + ", expected " + shape_string(t->shape()));
    *t = src;
    ++expected;
  }
  for (std::size_t b = 0; b < net.norm_state.size(); ++b) {
    const int d = net.params.branches[b].dilation;
    for (std::size_t p = 0; p < net.norm_state[b].size(); ++p) {
      auto& st = net.norm_state[b][p];
      for (auto [which, dst] : {std::pair{"running_mean", &st.running_mean}, std::pair{"running_var", &st.running_var}}) {
        const Tensor& src = c.block(norm_block(d, p, which));
        require(src.shape() == dst->shape(), ErrorKind::kIntegrity, "normalization block has the wrong shape");
        *dst = src;
        ++expected;
      }
    }
  }
  require(expected == c.blocks.size(), ErrorKind::kIntegrity, "checkpoint has unexpected extra blocks");
  if (info != nullptr) {
    info->rng_seed = seed;
    info->extra = c.header.value("extra", Json::object());
  }
  return net;
}

}  // namespace icefuse
