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
#include "icefuse/zscore.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "icefuse/error.hpp"

namespace icefuse {

double zscore(double coefficient, double sigma) {
  require(std::isfinite(sigma) && sigma >= 0.0, ErrorKind::kData,
          "standard deviation must be finite and non-negative, got " + std::to_string(sigma));
  require(sigma > 0.0, ErrorKind::kDeadNode, "zero-variance input: z-score undefined");
  return coefficient / sigma;
}

double zscore_corrected(double coefficient, double sigma, std::uint64_t n) {
  require(n >= 1, ErrorKind::kData, "sample count must be >= 1");
  require(std::isfinite(sigma) && sigma >= 0.0, ErrorKind::kData,
          "standard deviation must be finite and non-negative, got " + std::to_string(sigma));
  require(sigma > 0.0, ErrorKind::kDeadNode, "zero-variance input: z-score undefined");
  return std::sqrt(static_cast<double>(n)) * (coefficient / sigma);
}

namespace {

// 1-based descending ranks; ties keep the original order.
std::vector<std::size_t> descending_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::size_t> ranks(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
  return ranks;
}

// Pairs ordered one way in a and the other way in b.
std::size_t discordant_pairs(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if ((a[i] < a[j]) != (b[i] < b[j])) ++n;
  return n;
}

void check_groups(const std::vector<InputGroup>& groups, std::size_t d) {
  std::size_t next = 0;
  for (const auto& g : groups) {
    require(g.start == next && g.width > 0, ErrorKind::kUsage, "input groups must tile the mixing inputs contiguously");
    next += g.width;
  }
  require(next == d, ErrorKind::kUsage,
          "input groups cover " + std::to_string(next) + " inputs, expected " + std::to_string(d));
}

}  // namespace

std::vector<std::size_t> AnalysisReport::group_ranks() const { return descending_ranks(group_sums); }

std::size_t AnalysisReport::group_rank(const std::string& name) const {
  const auto ranks = group_ranks();
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].name == name) return ranks[g];
  fail(ErrorKind::kUsage, "report has no group '" + name + "'");
}

double AnalysisReport::group_sum(const std::string& name) const {
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].name == name) return group_sums[g];
  fail(ErrorKind::kUsage, "report has no group '" + name + "'");
}

std::optional<std::size_t> AnalysisReport::rank_of(std::size_t input_index) const {
  for (std::size_t pos = 0; pos < ranking.size(); ++pos)
    if (ranking[pos] == input_index) return pos + 1;
  return std::nullopt;
}

AnalysisReport analyze(std::span<const double> coefficients, const MixingStats& stats,
                       const std::vector<InputGroup>& groups, Variant variant, const AnalyzeOptions& options) {
  const std::size_t d = coefficients.size();
  require(stats.sigma.size() == d && stats.provenance.size() == d, ErrorKind::kUsage,
          "statistics cover " + std::to_string(stats.sigma.size()) + " inputs, network has " + std::to_string(d));
  check_groups(groups, d);
  require(options.dead_tolerance >= 0.0, ErrorKind::kUsage, "dead-node tolerance must be non-negative");
  const InputGroup& btemp = groups.back();
  for (std::size_t i = btemp.start; i < d; ++i) {
    require(stats.provenance[i] != GridProvenance::kUpsampledGrid, ErrorKind::kProvenance,
            "btemp input " + std::to_string(i) +
                " has statistics from the upsampled grid; radiometer standard deviations must be computed on the "
                "native grid before upsampling");
  }

  AnalysisReport report;
  report.variant = variant;
  report.groups = groups;
  report.entries.resize(d);
  report.group_sums.assign(groups.size(), 0.0);
  if (options.corrected_n) {
    report.eq1_n = options.corrected_n;
    report.z_corrected.assign(d, std::nullopt);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = groups[g].start; i < groups[g].start + groups[g].width; ++i) {
      ZScoreEntry& e = report.entries[i];
      e.input_index = i;
      e.group = groups[g].name;
      e.coefficient = coefficients[i];
      e.sigma = stats.sigma[i];
      require(std::isfinite(e.sigma) && e.sigma >= 0.0, ErrorKind::kData,
              "invalid standard deviation for input " + std::to_string(i));
      if (e.sigma <= options.dead_tolerance) {
        report.dead_nodes.push_back(i);
        continue;
      }
      e.z = zscore(e.coefficient, e.sigma);
      report.group_sums[g] += e.abs_z();
      if (options.corrected_n) report.z_corrected[i] = zscore_corrected(e.coefficient, e.sigma, *options.corrected_n);
    }
  }

  for (const auto& e : report.entries)
    if (!e.dead()) report.ranking.push_back(e.input_index);
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    return report.entries[a].abs_z() > report.entries[b].abs_z();
  });
  return report;
}

AnalysisReport analyze(const FusionNetwork& net, const MixingStats& stats, const AnalyzeOptions& options) {
  return analyze(net.params.mixing_coefficients.values(), stats, net.groups, net.config.variant, options);
}

TopK top_k(const AnalysisReport& report, std::size_t k) {
  require(k >= 1, ErrorKind::kUsage, "top-k needs k >= 1");
  TopK out;
  out.truncated = k > report.ranking.size();
  const std::size_t n = std::min(k, report.ranking.size());
  for (std::size_t pos = 0; pos < n; ++pos) out.entries.push_back(report.entries[report.ranking[pos]]);
  return out;
}

std::vector<std::size_t> detect_dead(const MixingStats& stats, double tolerance) {
  require(tolerance >= 0.0, ErrorKind::kUsage, "dead-node tolerance must be non-negative");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < stats.sigma.size(); ++i)
    if (stats.sigma[i] <= tolerance) out.push_back(i);
  return out;
}

ComparisonReport compare_variants(const AnalysisReport& small, const AnalysisReport& large, std::size_t k) {
  require(small.variant == Variant::kSmall && large.variant == Variant::kLarge, ErrorKind::kUsage,
          "compare_variants needs one small and one large report, got " + to_string(small.variant) + " and " +
              to_string(large.variant));
  require(small.groups.size() == large.groups.size(), ErrorKind::kUsage, "reports have different group layouts");

  ComparisonReport cmp;
  cmp.top_k = k;
  const auto small_ranks = small.group_ranks();
  const auto large_ranks = large.group_ranks();
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  for (std::size_t g = 0; g < small.groups.size(); ++g) {
    const std::string& name = small.groups[g].name;
    require(large.groups[g].name == name, ErrorKind::kUsage, "reports have different group layouts");
    cmp.groups.push_back({name, small.group_sums[g], large.group_sums[g], small_ranks[g], large_ranks[g]});
    a.push_back(small_ranks[g]);
    b.push_back(large_ranks[g]);
    if (name == kBtempGroup) cmp.btemp_stable = small_ranks[g] == large_ranks[g];
  }
  cmp.group_rank_inversions = discordant_pairs(a, b);

  auto keyed_positions = [](const AnalysisReport& r, std::size_t k) {
    std::map<std::pair<std::string, std::size_t>, std::size_t> pos;
    const TopK top = top_k(r, k);
    for (std::size_t p = 0; p < top.entries.size(); ++p) {
      const ZScoreEntry& e = top.entries[p];
      std::size_t start = 0;
      for (const auto& g : r.groups)
        if (g.name == e.group) start = g.start;
      pos[{e.group, e.input_index - start}] = p;
    }
    return pos;
  };
  const auto ps = keyed_positions(small, k);
  const auto pl = keyed_positions(large, k);
  std::vector<std::size_t> sa;
  std::vector<std::size_t> sb;
  for (const auto& [key, p] : ps) {
    auto it = pl.find(key);
    if (it == pl.end()) continue;
    sa.push_back(p);
    sb.push_back(it->second);
  }
  cmp.shared_top_entries = sa.size();
  cmp.top_entry_inversions = discordant_pairs(sa, sb);
  return cmp;
}

}  // namespace icefuse
