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
#include <algorithm>
#include <cmath>
#include <sstream>

#include "icefuse/error.hpp"
#include "icefuse/io.hpp"

namespace icefuse {

namespace {

constexpr const char* kReportSchema = "icefuse.report";
constexpr const char* kStatsSchema = "icefuse.stats";
constexpr const char* kComparisonSchema = "icefuse.comparison";
constexpr const char* kEntriesHeader = "input_index,group,coefficient,sigma,z,abs_z,rank,dead";
constexpr const char* kGroupsHeader = "group,sum_abs_z,rank";

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string provenance_comment(const ReportFile& f) {
  return "# icefuse " + tool_version() + " checkpoint=" + f.provenance.checkpoint_sha256 +
         " dataset=" + f.provenance.dataset_id + "\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

Variant infer_variant(const std::vector<InputGroup>& groups) {
  if (groups.size() != 6) return Variant::kCustom;
  bool small = true;
  bool large = true;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const bool branch = g > 0 && g + 1 < groups.size();
    small = small && groups[g].width == 14;
    large = large && groups[g].width == (branch ? 28u : 14u);
  }
  return small ? Variant::kSmall : large ? Variant::kLarge : Variant::kCustom;
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  fail(ErrorKind::kUsage, "unknown report format '" + s + "' (expected json or csv)");
}

Json report_to_json(const ReportFile& file) {
  const AnalysisReport& r = file.report;
  Json groups = Json::array();
  for (const auto& g : r.groups) groups.push_back({{"name", g.name}, {"start", g.start}, {"width", g.width}});

  Json entries = Json::array();
  for (const auto& e : r.entries) {
    const auto rank = r.rank_of(e.input_index);
    entries.push_back({{"input_index", e.input_index},
                       {"group", e.group},
                       {"coefficient", e.coefficient},
                       {"sigma", e.sigma},
                       {"z", optional_number(e.z)},
                       {"abs_z", e.dead() ? Json(nullptr) : Json(e.abs_z())},
                       {"rank", rank ? Json(*rank) : Json(nullptr)},
                       {"dead", e.dead()}});
  }

  Json sums = Json::object();
  const auto ranks = r.group_ranks();
  Json group_table = Json::array();
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    sums[r.groups[g].name] = r.group_sums[g];
    group_table.push_back({{"group", r.groups[g].name}, {"sum_abs_z", r.group_sums[g]}, {"rank", ranks[g]}});
  }

  const TopK top = top_k(r, file.top_k);
  Json rows = Json::array();
  for (std::size_t p = 0; p < top.entries.size(); ++p) {
    const auto& e = top.entries[p];
    rows.push_back({{"rank", p + 1}, {"input_index", e.input_index}, {"group", e.group}, {"z", *e.z}, {"abs_z", e.abs_z()}});
  }

  Json report = {{"variant", to_string(r.variant)},
                 {"groups", groups},
                 {"entries", entries},
                 {"group_sums", sums},
                 {"group_ranking", group_table},
                 {"ranking", r.ranking},
                 {"dead_nodes", r.dead_nodes},
                 {"top_k", {{"k", file.top_k}, {"truncated", top.truncated}, {"rows", rows}}}};
  if (r.eq1_n) {
    Json z = Json::array();
    for (const auto& v : r.z_corrected) z.push_back(optional_number(v));
    report["eq1"] = {{"n", *r.eq1_n}, {"z", z}};
  }

  Json prov_list = Json::array();
  for (auto p : file.provenance.stats_provenance) prov_list.push_back(to_string(p));
  return {{"schema", kReportSchema},
          {"format_version", kContainerFormatVersion},
          {"tool_version", tool_version()},
          {"provenance",
           {{"checkpoint_sha256", file.provenance.checkpoint_sha256},
            {"dataset_id", file.provenance.dataset_id},
            {"pixel_count", file.provenance.pixel_count},
            {"native_pixel_count", file.provenance.native_pixel_count},
            {"stats_provenance", prov_list}}},
          {"report", report}};
}

ReportFile report_from_json(const Json& j) {
  require_version(j, kReportSchema);
  try {
    ReportFile f;
    const Json& p = j.at("provenance");
    f.provenance.checkpoint_sha256 = p.at("checkpoint_sha256").get<std::string>();
    f.provenance.dataset_id = p.at("dataset_id").get<std::string>();
    f.provenance.pixel_count = p.at("pixel_count").get<std::uint64_t>();
    f.provenance.native_pixel_count = p.at("native_pixel_count").get<std::uint64_t>();
    for (const auto& s : p.at("stats_provenance")) f.provenance.stats_provenance.push_back(parse_grid_provenance(s));

    const Json& r = j.at("report");
    AnalysisReport& rep = f.report;
    rep.variant = parse_variant(r.at("variant").get<std::string>());
    for (const auto& g : r.at("groups"))
      rep.groups.push_back({g.at("name").get<std::string>(), g.at("start").get<std::size_t>(), g.at("width").get<std::size_t>()});
    for (const auto& e : r.at("entries")) {
      ZScoreEntry entry;
      entry.input_index = e.at("input_index").get<std::size_t>();
      entry.group = e.at("group").get<std::string>();
      entry.coefficient = e.at("coefficient").get<double>();
      entry.sigma = e.at("sigma").get<double>();
      if (!e.at("z").is_null()) entry.z = e.at("z").get<double>();
      rep.entries.push_back(entry);
    }
    for (const auto& g : rep.groups) rep.group_sums.push_back(r.at("group_sums").at(g.name).get<double>());
    rep.ranking = r.at("ranking").get<std::vector<std::size_t>>();
    rep.dead_nodes = r.at("dead_nodes").get<std::vector<std::size_t>>();
    if (r.contains("eq1")) {
      rep.eq1_n = r.at("eq1").at("n").get<std::uint64_t>();
      for (const auto& z : r.at("eq1").at("z"))
        rep.z_corrected.push_back(z.is_null() ? std::nullopt : std::optional<double>(z.get<double>()));
    }
    f.top_k = r.at("top_k").at("k").get<std::size_t>();
    return f;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed report: ") + e.what());
  }
}

std::string report_entries_csv(const ReportFile& file) {
  const AnalysisReport& r = file.report;
  std::string out = provenance_comment(file) + kEntriesHeader + "\n";
  for (const auto& e : r.entries) {
    const auto rank = r.rank_of(e.input_index);
    out += std::to_string(e.input_index) + "," + e.group + "," + format_double(e.coefficient) + "," +
           format_double(e.sigma) + ",";
    if (e.dead()) {
      out += ",,,1\n";
    } else {
      out += format_double(*e.z) + "," + format_double(e.abs_z()) + "," + std::to_string(*rank) + ",0\n";
    }
  }
  return out;
}

std::string report_groups_csv(const ReportFile& file) {
  const AnalysisReport& r = file.report;
  const auto ranks = r.group_ranks();
  std::string out = provenance_comment(file) + kGroupsHeader + "\n";
  for (std::size_t g = 0; g < r.groups.size(); ++g)
    out += r.groups[g].name + "," + format_double(r.group_sums[g]) + "," + std::to_string(ranks[g]) + "\n";
  return out;
}

std::string plot_table_csv(const ReportFile& file) {
  const AnalysisReport& r = file.report;
  const std::string variant = to_string(r.variant);
  std::string out = provenance_comment(file) + "figure,variant,item,group,z,abs_z,rank\n";
  const TopK top = top_k(r, file.top_k);
  for (std::size_t p = 0; p < top.entries.size(); ++p) {
    const auto& e = top.entries[p];
    const InputGroup* g = nullptr;
    for (const auto& cand : r.groups)
      if (cand.name == e.group) g = &cand;
    out += "top_z," + variant + "," + e.group + "#" + std::to_string(e.input_index - g->start) + "," + e.group + "," +
           format_double(*e.z) + "," + format_double(e.abs_z()) + "," + std::to_string(p + 1) + "\n";
  }
  const auto ranks = r.group_ranks();
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    out += "group_sum," + variant + "," + r.groups[g].name + "," + r.groups[g].name + ",," +
           format_double(r.group_sums[g]) + "," + std::to_string(ranks[g]) + "\n";
  }
  return out;
}

std::filesystem::path group_table_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension();
  p += ".groups.csv";
  return p;
}

void write_report(const ReportFile& file, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    write_text_atomic(path, report_to_json(file).dump(2) + "\n");
    return;
  }
  write_text_atomic(path, report_entries_csv(file));
  write_text_atomic(group_table_path(path), report_groups_csv(file));
}

namespace {

ReportFile read_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ReportFile f;
  AnalysisReport& r = f.report;
  bool header_seen = false;
  std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (rank, index)
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream words(line);
      std::string w;
      while (words >> w) {
        if (w.rfind("checkpoint=", 0) == 0) f.provenance.checkpoint_sha256 = w.substr(11);
        if (w.rfind("dataset=", 0) == 0) f.provenance.dataset_id = w.substr(8);
      }
      continue;
    }
    if (!header_seen) {
      require(line == kEntriesHeader, ErrorKind::kData, "unexpected report CSV header '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    require(cells.size() == 8, ErrorKind::kData, "report CSV row has " + std::to_string(cells.size()) + " cells");
    ZScoreEntry e;
    e.input_index = static_cast<std::size_t>(std::stoull(cells[0]));
    require(e.input_index == r.entries.size(), ErrorKind::kData, "report CSV rows must be in input order");
    e.group = cells[1];
    e.coefficient = parse_double(cells[2]);
    e.sigma = parse_double(cells[3]);
    const bool dead = cells[7] == "1";
    if (dead) {
      r.dead_nodes.push_back(e.input_index);
    } else {
      e.z = parse_double(cells[4]);
      ranked.emplace_back(static_cast<std::size_t>(std::stoull(cells[6])), e.input_index);
    }
    if (r.groups.empty() || r.groups.back().name != e.group) {
      r.groups.push_back({e.group, e.input_index, 0});
      r.group_sums.push_back(0.0);
    }
    ++r.groups.back().width;
    r.group_sums.back() += e.abs_z();
    r.entries.push_back(e);
  }
  require(header_seen && !r.entries.empty(), ErrorKind::kData, "report CSV has no rows");
  std::sort(ranked.begin(), ranked.end());
  for (const auto& [rank, idx] : ranked) r.ranking.push_back(idx);
  r.variant = infer_variant(r.groups);
  return f;
}

}  // namespace

ReportFile read_report(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::exception& e) {
      fail(ErrorKind::kData, std::string("malformed report JSON: ") + e.what());
    }
    return report_from_json(j);
  }
  return read_report_csv(text);
}

Json stats_to_json(const MixingStats& stats) {
  Json prov = Json::array();
  for (auto p : stats.provenance) prov.push_back(to_string(p));
  return {{"schema", kStatsSchema},
          {"format_version", kContainerFormatVersion},
          {"tool_version", tool_version()},
          {"pixel_count", stats.pixel_count},
          {"native_pixel_count", stats.native_pixel_count},
          {"mean", stats.mean},
          {"sigma", stats.sigma},
          {"provenance", prov}};
}

MixingStats stats_from_json(const Json& j) {
  require_version(j, kStatsSchema);
  try {
    MixingStats s;
    s.pixel_count = j.at("pixel_count").get<std::uint64_t>();
    s.native_pixel_count = j.at("native_pixel_count").get<std::uint64_t>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.sigma = j.at("sigma").get<std::vector<double>>();
    for (const auto& p : j.at("provenance")) s.provenance.push_back(parse_grid_provenance(p.get<std::string>()));
    require(s.mean.size() == s.sigma.size() && s.sigma.size() == s.provenance.size(), ErrorKind::kData,
            "statistics arrays differ in length");
    return s;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed statistics file: ") + e.what());
  }
}

Json comparison_to_json(const ComparisonReport& cmp, const std::string& small_digest, const std::string& large_digest) {
  Json groups = Json::array();
  for (const auto& g : cmp.groups) {
    groups.push_back({{"group", g.group},
                      {"small_sum_abs_z", g.small_sum},
                      {"small_rank", g.small_rank},
                      {"large_sum_abs_z", g.large_sum},
                      {"large_rank", g.large_rank}});
  }
  return {{"schema", kComparisonSchema},
          {"format_version", kContainerFormatVersion},
          {"tool_version", tool_version()},
          {"inputs", {{"small_report_sha256", small_digest}, {"large_report_sha256", large_digest}}},
          {"groups", groups},
          {"btemp_stable", cmp.btemp_stable},
          {"group_rank_inversions", cmp.group_rank_inversions},
          {"top_k", cmp.top_k},
          {"shared_top_entries", cmp.shared_top_entries},
          {"top_entry_inversions", cmp.top_entry_inversions}};
}

}  // namespace icefuse
