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

// Leaderboard construction from posterior draws: census post-stratification,
// expected round-robin points (winshare), rank statistics, per-group
// rankings, rank-shift summaries, and raw tie-rate tables.

#ifndef PREF_ARENA_SCORING_HPP_
#define PREF_ARENA_SCORING_HPP_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pref_arena/core.hpp"
#include "pref_arena/sampler.hpp"

namespace arena {

// Census proportions per country and axis, keyed by qualified group label.
struct CensusTable {
  struct CountryCensus {
    double population = 0.0;  // adult population, used for the default mix
    std::array<std::map<std::string, double>, kNumAxes> axes;
  };
  std::map<Country, CountryCensus> countries;

  bool has(Country country) const { return countries.count(country) > 0; }
  // Checks weights are non-negative, sum to 1 per (country, axis), belong to
  // the country, and name indexed groups.
  void validate(const std::array<std::vector<std::string>, kNumAxes>&
                    group_labels) const;
  // Dense weights aligned with `group_labels`; all zero if the axis is absent.
  Eigen::VectorXd axis_weights(Country country, Axis axis,
                               const std::vector<std::string>& group_labels) const;
  // Country mix proportional to the stated populations (uniform if none).
  std::map<Country, double> default_mix() const;
};

using CountryMix = std::map<Country, double>;

struct LeaderboardEntry {
  ModelRef model;
  double score_mean = 0.0;
  std::pair<double, double> score_ci = {0.0, 0.0};
  double expected_rank = 0.0;
  double p_best = 0.0;
};

enum class TieGrouping { kByMetric, kByAgeGroup, kByMetricAndAge };

struct TieRateReport {
  std::optional<MetricRef> metric;
  std::optional<std::string> age_group;
  double tie_rate = 0.0;
  int n = 0;
};

struct RankShiftReport {
  Axis axis = Axis::kAge;
  std::vector<ModelRef> models;
  std::vector<std::string> groups;
  Eigen::VectorXd overall_rank;    // posterior-mean rank per model
  Eigen::MatrixXd group_rank;      // model x group posterior-mean rank
  Eigen::VectorXd model_shift;     // mean |group rank - overall rank|
  double axis_shift = 0.0;         // mean of model_shift
};

// Per-country census weights resolved against a draw set's group labels.
struct PopulationWeights {
  std::array<Eigen::VectorXd, kNumAxes> axes;

  static PopulationWeights resolve(
      const CensusTable& census, Country country,
      const std::array<std::vector<std::string>, kNumAxes>& group_labels);
};

Eigen::VectorXd population_skill(const DrawSnapshot& draw,
                                 const PopulationWeights& weights,
                                 double alpha);
// Throws kMissingCensus if `country` has no census entry.
Eigen::VectorXd population_skill(const DrawSnapshot& draw,
                                 const CensusTable& census, Country country,
                                 const PosteriorDraws& context);

// p_win + p_tie / 2 at eta = theta_i - theta_j. EP(i,j) + EP(j,i) == 1.
double expected_points(double theta_i, double theta_j, double nu);

std::vector<double> score_per_draw(const Eigen::VectorXd& theta_pop, double nu);

// Ranks 1..n by descending score; equal scores go to the lower model index.
std::vector<int> ranks_by_score(const std::vector<double>& scores);

std::vector<LeaderboardEntry> leaderboard(const PosteriorDraws& draws,
                                          const CensusTable& census,
                                          const CountryMix& country_mix);

// Leaderboard with demographic effects switched off (theta only).
std::vector<LeaderboardEntry> baseline_leaderboard(const PosteriorDraws& draws);

std::vector<LeaderboardEntry> group_leaderboard(const PosteriorDraws& draws,
                                                Axis axis,
                                                const std::string& group);

RankShiftReport rank_shift_report(const PosteriorDraws& draws, Axis axis);

std::vector<TieRateReport> empirical_tie_rates(const Dataset& dataset,
                                               TieGrouping grouping);

}  // namespace arena

#endif  // PREF_ARENA_SCORING_HPP_
