// Copyright 2026 The Pref Arena Authors.
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

// Two-way decomposition of tie rates over pairs of demographic axes: cell
// tables, main effects, interaction effects and variance shares.

#ifndef PREF_ARENA_DECOMPOSE_HPP_
#define PREF_ARENA_DECOMPOSE_HPP_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pref_arena/core.hpp"

namespace arena {

struct RateTable {
  Axis row_axis = Axis::kAge;
  Axis col_axis = Axis::kPolitics;
  std::vector<std::string> row_groups;
  std::vector<std::string> col_groups;
  Eigen::MatrixXd rates;   // NaN where the cell is empty
  Eigen::MatrixXd counts;  // fractional for multi-membership raters; may be empty

  bool has_counts() const { return counts.size() > 0; }
  // Cells with zero observations.
  std::vector<std::pair<int, int>> empty_cells() const;
  void validate() const;
};

// Tie fraction per (row group, col group) among raters of `country` observed
// on both axes. A rater with m_r row groups and m_c col groups adds weight
// 1/(m_r*m_c) to each matching cell. Restricted to `metric` when given.
RateTable tie_rate_table(const Dataset& dataset, Axis row_axis, Axis col_axis,
                         Country country,
                         const std::optional<MetricRef>& metric = std::nullopt);

// Repeatedly drops the row or column holding the most cells below
// `min_count` until every cell qualifies.
RateTable drop_sparse(const RateTable& table, double min_count = 1.0);

enum class CellWeighting { kUnweighted, kCountWeighted };

struct DecompositionResult {
  double grand_mean = 0.0;
  Eigen::VectorXd row_effects;
  Eigen::VectorXd col_effects;
  Eigen::MatrixXd interaction;
  Eigen::MatrixXd additive;  // grand_mean + row + col
  double ss_row = 0.0;
  double ss_col = 0.0;
  double ss_interaction = 0.0;
  double variance_share_interaction = 0.0;
  // Same share with sums of squares weighted by cell counts, when known.
  std::optional<double> variance_share_interaction_weighted;
  double max_abs_interaction = 0.0;
  double mean_abs_interaction = 0.0;
};

DecompositionResult anova_decompose(
    const Eigen::MatrixXd& values,
    CellWeighting weighting = CellWeighting::kUnweighted,
    const Eigen::MatrixXd& counts = Eigen::MatrixXd());
DecompositionResult anova_decompose(
    const RateTable& table,
    CellWeighting weighting = CellWeighting::kUnweighted);

}  // namespace arena

#endif  // PREF_ARENA_DECOMPOSE_HPP_
