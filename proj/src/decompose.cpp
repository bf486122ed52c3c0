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

#include "pref_arena/decompose.hpp"

#include <cmath>
#include <limits>

#include "pref_arena/error.hpp"

namespace arena {
namespace {

std::vector<std::string> axis_groups_for(const Dataset& dataset, Axis axis,
                                         Country country) {
  std::vector<std::string> out;
  for (const auto& label : dataset.group_index(axis).labels()) {
    if (axis == Axis::kAge) {
      out.push_back(label);
      continue;
    }
    auto owner = group_country(label);
    if (owner && *owner == country) out.push_back(label);
  }
  return out;
}

std::vector<std::pair<int, double>> cell_weights(
    const std::vector<std::string>& memberships,
    const std::vector<std::string>& labels) {
  std::vector<std::pair<int, double>> out;
  if (memberships.empty()) return out;
  const double share = 1.0 / static_cast<double>(memberships.size());
  for (const auto& group : memberships) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == group) out.emplace_back(static_cast<int>(i), share);
    }
  }
  return out;
}

template <typename T>
std::vector<T> erase_at(const std::vector<T>& values, int position) {
  std::vector<T> out = values;
  out.erase(out.begin() + position);
  return out;
}

Eigen::MatrixXd remove_row(const Eigen::MatrixXd& m, int row) {
  Eigen::MatrixXd out(m.rows() - 1, m.cols());
  for (Eigen::Index r = 0, k = 0; r < m.rows(); ++r) {
    if (r != row) out.row(k++) = m.row(r);
  }
  return out;
}

Eigen::MatrixXd remove_col(const Eigen::MatrixXd& m, int col) {
  return remove_row(m.transpose(), col).transpose();
}

}  // namespace

std::vector<std::pair<int, int>> RateTable::empty_cells() const {
  std::vector<std::pair<int, int>> out;
  for (Eigen::Index i = 0; i < rates.rows(); ++i) {
    for (Eigen::Index j = 0; j < rates.cols(); ++j) {
      const bool empty =
          has_counts() ? !(counts(i, j) > 0.0) : !std::isfinite(rates(i, j));
      if (empty) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

void RateTable::validate() const {
  if (rates.rows() != static_cast<Eigen::Index>(row_groups.size()) ||
      rates.cols() != static_cast<Eigen::Index>(col_groups.size()) ||
      (has_counts() &&
       (counts.rows() != rates.rows() || counts.cols() != rates.cols()))) {
    throw Error(ErrorCode::kDimensionMismatch, "rate table shape mismatch");
  }
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    const double rate = rates.data()[i];
    if (std::isfinite(rate) && (rate < 0.0 || rate > 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "tie rate outside [0,1]");
    }
    if (has_counts() && counts.data()[i] < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "negative cell count");
    }
  }
}

RateTable tie_rate_table(const Dataset& dataset, Axis row_axis, Axis col_axis,
                         Country country, const std::optional<MetricRef>& metric) {
  if (row_axis == col_axis) {
    throw Error(ErrorCode::kInvalidArgument, "row and column axes must differ");
  }
  RateTable table;
  table.row_axis = row_axis;
  table.col_axis = col_axis;
  table.row_groups = axis_groups_for(dataset, row_axis, country);
  table.col_groups = axis_groups_for(dataset, col_axis, country);
  const auto rows = static_cast<Eigen::Index>(table.row_groups.size());
  const auto cols = static_cast<Eigen::Index>(table.col_groups.size());
  Eigen::MatrixXd ties = Eigen::MatrixXd::Zero(rows, cols);
  table.counts = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& record : dataset.records) {
    if (record.rater.country != country) continue;
    if (metric && record.metric != *metric) continue;
    const auto row_w = cell_weights(record.rater.groups(row_axis), table.row_groups);
    const auto col_w = cell_weights(record.rater.groups(col_axis), table.col_groups);
    const double tie = record.outcome == Outcome::kTie ? 1.0 : 0.0;
    for (const auto& [i, wi] : row_w) {
      for (const auto& [j, wj] : col_w) {
        table.counts(i, j) += wi * wj;
        ties(i, j) += wi * wj * tie;
      }
    }
  }
  table.rates.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      table.rates(i, j) = table.counts(i, j) > 0.0
                              ? ties(i, j) / table.counts(i, j)
                              : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return table;
}

RateTable drop_sparse(const RateTable& table, double min_count) {
  RateTable out = table;
  auto sparse = [&](Eigen::Index i, Eigen::Index j) {
    return out.has_counts() ? out.counts(i, j) < min_count
                            : !std::isfinite(out.rates(i, j));
  };
  while (out.rates.size() > 0) {
    int best_count = 0;
    int best_index = -1;
    bool best_is_row = true;
    for (Eigen::Index i = 0; i < out.rates.rows(); ++i) {
      int n = 0;
      for (Eigen::Index j = 0; j < out.rates.cols(); ++j) n += sparse(i, j);
      if (n > best_count) {
        best_count = n;
        best_index = static_cast<int>(i);
        best_is_row = true;
      }
    }
    for (Eigen::Index j = 0; j < out.rates.cols(); ++j) {
      int n = 0;
      for (Eigen::Index i = 0; i < out.rates.rows(); ++i) n += sparse(i, j);
      if (n > best_count) {
        best_count = n;
        best_index = static_cast<int>(j);
        best_is_row = false;
      }
    }
    if (best_index < 0) break;
    if (best_is_row) {
      out.row_groups = erase_at(out.row_groups, best_index);
      out.rates = remove_row(out.rates, best_index);
      if (out.has_counts()) out.counts = remove_row(out.counts, best_index);
    } else {
      out.col_groups = erase_at(out.col_groups, best_index);
      out.rates = remove_col(out.rates, best_index);
      if (out.has_counts()) out.counts = remove_col(out.counts, best_index);
    }
  }
  return out;
}

DecompositionResult anova_decompose(const Eigen::MatrixXd& values,
                                    CellWeighting weighting,
                                    const Eigen::MatrixXd& counts) {
  const Eigen::Index rows = values.rows();
  const Eigen::Index cols = values.cols();
  if (rows < 2 || cols < 2) {
    throw Error(ErrorCode::kDegenerateTable, "need at least 2 rows and 2 columns");
  }
  const bool has_counts = counts.size() > 0;
  if (has_counts && (counts.rows() != rows || counts.cols() != cols)) {
    throw Error(ErrorCode::kDimensionMismatch, "counts do not match the table");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::isfinite(values(i, j)) || (has_counts && !(counts(i, j) > 0.0))) {
        throw Error(ErrorCode::kEmptyCellPresent,
                    "empty cell at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
      }
    }
  }
  if (weighting == CellWeighting::kCountWeighted && !has_counts) {
    throw Error(ErrorCode::kInvalidArgument, "count weighting needs counts");
  }
  const Eigen::MatrixXd w = weighting == CellWeighting::kCountWeighted
                                ? counts
                                : Eigen::MatrixXd::Ones(rows, cols);

  DecompositionResult out;
  out.grand_mean = (w.array() * values.array()).sum() / w.sum();
  const Eigen::VectorXd row_mean =
      (w.array() * values.array()).rowwise().sum() / w.array().rowwise().sum();
  const Eigen::RowVectorXd col_mean =
      (w.array() * values.array()).colwise().sum() / w.array().colwise().sum();
  out.row_effects = row_mean.array() - out.grand_mean;
  out.col_effects = col_mean.transpose().array() - out.grand_mean;
  out.additive.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out.additive(i, j) = out.grand_mean + out.row_effects[i] + out.col_effects[j];
    }
  }
  out.interaction = values - out.additive;

  auto shares = [&](const Eigen::MatrixXd& weights, double* ss_row, double* ss_col,
                    double* ss_int) {
    *ss_row = 0.0;
    *ss_col = 0.0;
    *ss_int = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double cell = weights(i, j);
        *ss_row += cell * out.row_effects[i] * out.row_effects[i];
        *ss_col += cell * out.col_effects[j] * out.col_effects[j];
        *ss_int += cell * out.interaction(i, j) * out.interaction(i, j);
      }
    }
    const double total = *ss_row + *ss_col + *ss_int;
    return total > 0.0 ? *ss_int / total : 0.0;
  };
  out.variance_share_interaction = shares(Eigen::MatrixXd::Ones(rows, cols),
                                          &out.ss_row, &out.ss_col,
                                          &out.ss_interaction);
  if (has_counts) {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    out.variance_share_interaction_weighted = shares(counts, &a, &b, &c);
  }
  out.max_abs_interaction = out.interaction.cwiseAbs().maxCoeff();
  out.mean_abs_interaction = out.interaction.cwiseAbs().mean();
  return out;
}

DecompositionResult anova_decompose(const RateTable& table,
                                    CellWeighting weighting) {
  table.validate();
  return anova_decompose(table.rates, weighting, table.counts);
}

}  // namespace arena
