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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icefuse/fusion_net.hpp"
#include "icefuse/trainer.hpp"

namespace icefuse {

// Coefficient over input standard deviation, without the sqrt(n)
// degrees-of-freedom factor. Throws kDeadNode for sigma == 0 and kData for a
// negative or non-finite sigma.
double zscore(double coefficient, double sigma);

// c / (sigma / sqrt(n)); the classical form. Not used by default reports,
// since neighbouring pixels are not independent samples.
double zscore_corrected(double coefficient, double sigma, std::uint64_t n);

inline constexpr double kDeadTolerance = 1e-12;
inline constexpr std::size_t kDefaultTopK = 14;

struct ZScoreEntry {
  std::size_t input_index = 0;
  std::string group;
  double coefficient = 0.0;
  double sigma = 0.0;
  std::optional<double> z;  // empty for dead inputs

  bool dead() const { return !z.has_value(); }
  double abs_z() const { return z ? (*z < 0 ? -*z : *z) : 0.0; }
  bool operator==(const ZScoreEntry&) const = default;
};

struct AnalysisReport {
  Variant variant = Variant::kCustom;
  std::vector<InputGroup> groups;
  std::vector<ZScoreEntry> entries;    // one per mixing input
  std::vector<double> group_sums;      // sum of |z| per group, aligned with groups
  std::vector<std::size_t> ranking;    // live input indices, |z| descending
  std::vector<std::size_t> dead_nodes;
  // Present only when the sqrt(n)-corrected scores were requested.
  std::optional<std::uint64_t> eq1_n;
  std::vector<std::optional<double>> z_corrected;

  // 1-based position of each group when sorted by group sum, descending.
  std::vector<std::size_t> group_ranks() const;
  std::size_t group_rank(const std::string& name) const;
  double group_sum(const std::string& name) const;
  // 1-based rank of an input in ranking, or nullopt when dead.
  std::optional<std::size_t> rank_of(std::size_t input_index) const;

  bool operator==(const AnalysisReport&) const = default;
};

struct AnalyzeOptions {
  double dead_tolerance = kDeadTolerance;
  // When set, also compute c / (sigma / sqrt(n)) for every live input.
  std::optional<std::uint64_t> corrected_n;
};

// Builds the report from mixing coefficients and input statistics. Refuses
// radiometer statistics measured on the upsampled grid (kProvenance).
AnalysisReport analyze(std::span<const double> coefficients, const MixingStats& stats,
                       const std::vector<InputGroup>& groups, Variant variant, const AnalyzeOptions& options = {});
AnalysisReport analyze(const FusionNetwork& net, const MixingStats& stats, const AnalyzeOptions& options = {});

struct TopK {
  std::vector<ZScoreEntry> entries;
  bool truncated = false;  // fewer live entries than requested
};

TopK top_k(const AnalysisReport& report, std::size_t k = kDefaultTopK);

// Indices whose standard deviation is <= tolerance.
std::vector<std::size_t> detect_dead(const MixingStats& stats, double tolerance = kDeadTolerance);

struct GroupComparison {
  std::string group;
  double small_sum = 0.0;
  double large_sum = 0.0;
  std::size_t small_rank = 0;
  std::size_t large_rank = 0;
};

struct ComparisonReport {
  std::vector<GroupComparison> groups;
  bool btemp_stable = false;
  std::size_t group_rank_inversions = 0;
  std::size_t shared_top_entries = 0;
  std::size_t top_entry_inversions = 0;
  std::size_t top_k = kDefaultTopK;
};

// Entries are matched across variants by (group, position within group).
ComparisonReport compare_variants(const AnalysisReport& small, const AnalysisReport& large,
                                  std::size_t k = kDefaultTopK);

}  // namespace icefuse
