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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pref_arena/decompose.hpp"
#include "pref_arena/error.hpp"
#include "test_support.hpp"

namespace arena {
namespace {

using testing::make_record;
using testing::reference_anova;

Eigen::MatrixXd table(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(Anova, AdditiveTableHasNoInteraction) {
  const auto result = anova_decompose(table({{1, 2}, {3, 4}}));
  EXPECT_DOUBLE_EQ(result.grand_mean, 2.5);
  EXPECT_NEAR(result.row_effects[0], -1.0, 1e-15);
  EXPECT_NEAR(result.col_effects[1], 0.5, 1e-15);
  EXPECT_NEAR(result.interaction.cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(result.variance_share_interaction, 0.0, 1e-15);
}

TEST(Anova, CrossedTableHandValues) {
  const auto result = anova_decompose(table({{1, 2}, {4, 3}}));
  EXPECT_NEAR(result.interaction(0, 0), -0.5, 1e-15);
  EXPECT_NEAR(result.interaction(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(result.interaction(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(result.interaction(1, 1), -0.5, 1e-15);
  EXPECT_NEAR(result.variance_share_interaction, 0.2, 1e-15);
  EXPECT_NEAR(result.max_abs_interaction, 0.5, 1e-15);
  EXPECT_NEAR(result.mean_abs_interaction, 0.5, 1e-15);
}

TEST(Anova, ConstantTableHasZeroShare) {
  const auto result = anova_decompose(Eigen::MatrixXd::Constant(3, 4, 0.25));
  EXPECT_EQ(result.variance_share_interaction, 0.0);
  EXPECT_NEAR(result.grand_mean, 0.25, 1e-15);
}

TEST(Anova, MatchesLoopOracleOnRandomTables) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim(2, 5);
  std::uniform_real_distribution<double> rate(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::MatrixXd y(dim(rng), dim(rng));
    for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = rate(rng);
    const auto result = anova_decompose(y);
    const auto ref = reference_anova(to_rows(y));
    EXPECT_NEAR(result.grand_mean, ref.mu, 1e-12);
    EXPECT_NEAR(result.variance_share_interaction, ref.share, 1e-12);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      EXPECT_NEAR(result.row_effects[i], ref.alpha[i], 1e-12);
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        EXPECT_NEAR(result.interaction(i, j), ref.gamma[i][j], 1e-12);
        EXPECT_NEAR(result.grand_mean + result.row_effects[i] + result.col_effects[j] +
                        result.interaction(i, j),
                    y(i, j), 1e-14);
      }
    }
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      EXPECT_NEAR(result.col_effects[j], ref.beta[j], 1e-12);
    }
    EXPECT_NEAR(result.row_effects.sum(), 0.0, 1e-12);
    EXPECT_NEAR(result.col_effects.sum(), 0.0, 1e-12);
    EXPECT_NEAR(result.interaction.rowwise().sum().cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(result.interaction.colwise().sum().cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(Anova, ShiftInvarianceAndRowSwap) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> rate(0.0, 1.0);
  Eigen::MatrixXd y(4, 3);
  for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = rate(rng);
  const auto base = anova_decompose(y);
  const auto shifted = anova_decompose((y.array() + 0.7).matrix());
  EXPECT_NEAR(shifted.grand_mean, base.grand_mean + 0.7, 1e-12);
  EXPECT_LT((shifted.row_effects - base.row_effects).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((shifted.col_effects - base.col_effects).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((shifted.interaction - base.interaction).cwiseAbs().maxCoeff(), 1e-12);

  Eigen::MatrixXd swapped = y;
  swapped.row(0).swap(swapped.row(2));
  const auto perm = anova_decompose(swapped);
  EXPECT_NEAR(perm.row_effects[0], base.row_effects[2], 1e-12);
  EXPECT_NEAR(perm.row_effects[2], base.row_effects[0], 1e-12);
  EXPECT_LT((perm.interaction.row(0) - base.interaction.row(2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((perm.interaction.row(1) - base.interaction.row(1)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(perm.variance_share_interaction, base.variance_share_interaction, 1e-12);
}

TEST(Anova, CountWeightedShare) {
  const Eigen::MatrixXd y = table({{1, 2}, {4, 3}});
  const Eigen::MatrixXd equal = Eigen::MatrixXd::Constant(2, 2, 5.0);
  const auto same = anova_decompose(y, CellWeighting::kCountWeighted, equal);
  EXPECT_NEAR(same.variance_share_interaction, 0.2, 1e-12);
  ASSERT_TRUE(same.variance_share_interaction_weighted.has_value());
  EXPECT_NEAR(*same.variance_share_interaction_weighted, 0.2, 1e-12);

  const Eigen::MatrixXd skew = table({{100, 1}, {1, 1}});
  const auto weighted = anova_decompose(y, CellWeighting::kCountWeighted, skew);
  double total = 0.0;
  for (Eigen::Index k = 0; k < 4; ++k) total += skew.data()[k] * y.data()[k];
  EXPECT_NEAR(weighted.grand_mean, total / 103.0, 1e-12);
  EXPECT_THROW(anova_decompose(y, CellWeighting::kCountWeighted), Error);
}

TEST(Anova, Errors) {
  EXPECT_EQ(code_of([] { anova_decompose(Eigen::MatrixXd::Ones(1, 3)); }),
            ErrorCode::kDegenerateTable);
  EXPECT_EQ(code_of([] { anova_decompose(Eigen::MatrixXd::Ones(3, 1)); }),
            ErrorCode::kDegenerateTable);
  Eigen::MatrixXd hole = Eigen::MatrixXd::Ones(2, 2);
  hole(1, 0) = std::nan("");
  EXPECT_EQ(code_of([&] { anova_decompose(hole); }), ErrorCode::kEmptyCellPresent);
  const Eigen::MatrixXd counts = table({{3, 0}, {1, 1}});
  EXPECT_EQ(code_of([&] {
              anova_decompose(Eigen::MatrixXd::Ones(2, 2), CellWeighting::kUnweighted, counts);
            }),
            ErrorCode::kEmptyCellPresent);
}

ComparisonRecord rated(int id, Outcome outcome, std::vector<std::string> ages,
                       std::vector<std::string> parties, std::string metric = "overall") {
  auto record = make_record("r" + std::to_string(id), "x", "y", outcome, std::move(metric));
  record.rater.country = Country::kUS;
  record.rater.groups(Axis::kAge) = std::move(ages);
  record.rater.groups(Axis::kPolitics) = std::move(parties);
  return record;
}

TEST(TieRates, SingleCellCount) {
  std::vector<ComparisonRecord> records;
  for (int i = 0; i < 10; ++i) {
    records.push_back(rated(i, i < 3 ? Outcome::kTie : Outcome::kWinA, {"18-34"},
                            {"US:Democrat"}));
  }
  const auto t = tie_rate_table(build_index(records), Axis::kAge, Axis::kPolitics,
                                Country::kUS);
  ASSERT_EQ(t.rates.rows(), 1);
  ASSERT_EQ(t.rates.cols(), 1);
  EXPECT_NEAR(t.rates(0, 0), 0.30, 1e-15);
  EXPECT_NEAR(t.counts(0, 0), 10.0, 1e-15);
}

TEST(TieRates, AllTiesAndFractionalMembership) {
  std::vector<ComparisonRecord> records = {
      rated(0, Outcome::kTie, {"18-34"}, {"US:Democrat"}),
      rated(1, Outcome::kTie, {"55+"}, {"US:Republican"}),
      rated(2, Outcome::kTie, {"18-34", "55+"}, {"US:Democrat", "US:Republican"}),
      rated(3, Outcome::kTie, {"55+"}, {"US:Democrat"}),
      rated(4, Outcome::kTie, {"18-34"}, {"US:Republican"}),
      rated(5, Outcome::kTie, {"18-34"}, {}),
  };
  const auto t = tie_rate_table(build_index(records), Axis::kAge, Axis::kPolitics,
                                Country::kUS);
  ASSERT_EQ(t.rates.rows(), 2);
  ASSERT_EQ(t.rates.cols(), 2);
  EXPECT_TRUE((t.rates.array() == 1.0).all());
  EXPECT_NEAR(t.counts.sum(), 5.0, 1e-15);
  EXPECT_NEAR(t.counts(0, 0), 1.25, 1e-15);
  EXPECT_TRUE(t.empty_cells().empty());
}

TEST(TieRates, MetricFilterCountryAndEmptyCells) {
  std::vector<ComparisonRecord> records = {
      rated(0, Outcome::kTie, {"18-34"}, {"US:Democrat"}, "trust"),
      rated(1, Outcome::kWinB, {"18-34"}, {"US:Democrat"}, "overall"),
      rated(2, Outcome::kWinA, {"55+"}, {"US:Republican"}, "overall"),
  };
  auto uk = make_record("r9", "x", "y", Outcome::kTie);
  uk.rater.country = Country::kUK;
  uk.rater.groups(Axis::kAge) = {"18-34"};
  uk.rater.groups(Axis::kPolitics) = {"UK:Labour"};
  records.push_back(uk);
  const Dataset data = build_index(records);
  const auto all = tie_rate_table(data, Axis::kAge, Axis::kPolitics, Country::kUS);
  EXPECT_EQ(all.col_groups, (std::vector<std::string>{"US:Democrat", "US:Republican"}));
  EXPECT_NEAR(all.rates(0, 0), 0.5, 1e-15);
  EXPECT_EQ(all.empty_cells().size(), 2u);
  EXPECT_TRUE(std::isnan(all.rates(0, 1)));
  const auto trust = tie_rate_table(data, Axis::kAge, Axis::kPolitics, Country::kUS,
                                    MetricRef("trust"));
  EXPECT_NEAR(trust.rates(0, 0), 1.0, 1e-15);
  EXPECT_EQ(code_of([&] { anova_decompose(all); }), ErrorCode::kEmptyCellPresent);
  EXPECT_THROW(tie_rate_table(data, Axis::kAge, Axis::kAge, Country::kUS), Error);
}

TEST(TieRates, DropSparse) {
  RateTable t;
  t.row_groups = {"a", "b", "c"};
  t.col_groups = {"x", "y", "z"};
  t.rates = table({{0.1, 0.2, 0.3}, {0.2, 0.3, 0.4}, {0.5, 0.6, 0.7}});
  t.counts = table({{10, 10, 10}, {10, 0, 10}, {10, 0, 10}});
  t.rates(1, 1) = std::nan("");
  t.rates(2, 1) = std::nan("");
  const auto kept = drop_sparse(t, 1.0);
  EXPECT_EQ(kept.row_groups, t.row_groups);
  EXPECT_EQ(kept.col_groups, (std::vector<std::string>{"x", "z"}));
  EXPECT_TRUE(kept.empty_cells().empty());
  const auto result = anova_decompose(kept, CellWeighting::kCountWeighted);
  EXPECT_TRUE(result.variance_share_interaction_weighted.has_value());
}

}  // namespace
}  // namespace arena
