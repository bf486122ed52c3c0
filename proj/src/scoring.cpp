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

#include "pref_arena/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pref_arena/error.hpp"
#include "pref_arena/likelihood.hpp"
#include "pref_arena/stats.hpp"

namespace arena {
namespace {

using SkillFn = std::function<Eigen::VectorXd(const DrawSnapshot&)>;

struct Aggregate {
  std::vector<std::vector<double>> scores;  // per model, per draw
  Eigen::VectorXd rank_sum;
  Eigen::VectorXd best_count;
  int n_draws = 0;

  Eigen::VectorXd expected_rank() const { return rank_sum / n_draws; }
};

Aggregate aggregate(const PosteriorDraws& draws, const SkillFn& skill) {
  if (draws.empty()) throw Error(ErrorCode::kEmptyDraws, "no posterior draws");
  const int n = draws.spec.n_models;
  if (n < 2) throw Error(ErrorCode::kTooFewModels, "need >= 2 models to rank");
  Aggregate out;
  out.scores.assign(n, {});
  out.rank_sum = Eigen::VectorXd::Zero(n);
  out.best_count = Eigen::VectorXd::Zero(n);
  for (const auto& draw : draws.draws) {
    const std::vector<double> scores = score_per_draw(skill(draw), draw.nu);
    const std::vector<int> ranks = ranks_by_score(scores);
    for (int i = 0; i < n; ++i) {
      out.scores[i].push_back(scores[i]);
      out.rank_sum[i] += ranks[i];
      if (ranks[i] == 1) out.best_count[i] += 1.0;
    }
    ++out.n_draws;
  }
  return out;
}

std::vector<LeaderboardEntry> entries_of(const PosteriorDraws& draws,
                                         const Aggregate& agg) {
  const int n = draws.spec.n_models;
  std::vector<LeaderboardEntry> entries;
  entries.reserve(n);
  for (int i = 0; i < n; ++i) {
    LeaderboardEntry entry;
    entry.model = i < static_cast<int>(draws.model_labels.size())
                      ? draws.model_labels[i]
                      : std::to_string(i);
    entry.score_mean = stats::mean(agg.scores[i]);
    entry.score_ci = {stats::quantile(agg.scores[i], 0.025),
                      stats::quantile(agg.scores[i], 0.975)};
    entry.expected_rank = agg.rank_sum[i] / agg.n_draws;
    entry.p_best = agg.best_count[i] / agg.n_draws;
    entries.push_back(std::move(entry));
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                     if (a.score_mean != b.score_mean) {
                       return a.score_mean > b.score_mean;
                     }
                     return a.model < b.model;
                   });
  return entries;
}

int group_position(const PosteriorDraws& draws, Axis axis,
                   const std::string& group) {
  const auto& labels = draws.group_labels[axis_slot(axis)];
  auto it = std::find(labels.begin(), labels.end(), group);
  if (it == labels.end()) {
    throw Error(ErrorCode::kUnknownGroup,
                group + " is not a group on the " + std::string(axis_name(axis)) +
                    " axis");
  }
  return static_cast<int>(it - labels.begin());
}

}  // namespace

void CensusTable::validate(
    const std::array<std::vector<std::string>, kNumAxes>& group_labels) const {
  for (const auto& [country, entry] : countries) {
    if (entry.population < 0.0) {
      throw Error(ErrorCode::kValidationError, "negative census population");
    }
    for (Axis axis : kAllAxes) {
      const auto& weights = entry.axes[axis_slot(axis)];
      if (weights.empty()) continue;
      const auto& labels = group_labels[axis_slot(axis)];
      double total = 0.0;
      for (const auto& [label, weight] : weights) {
        if (!(weight >= 0.0) || !std::isfinite(weight)) {
          throw Error(ErrorCode::kValidationError,
                      "census weight for " + label + " is negative");
        }
        auto owner = group_country(label);
        if (axis != Axis::kAge && owner && *owner != country) {
          throw Error(ErrorCode::kValidationError,
                      "census for " + std::string(country_name(country)) +
                          " names foreign group " + label);
        }
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
          throw Error(ErrorCode::kUnknownGroup,
                      "census group " + label + " is not in the group registry");
        }
        total += weight;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw Error(ErrorCode::kValidationError,
                    "census weights for " + std::string(country_name(country)) +
                        "/" + std::string(axis_name(axis)) + " sum to " +
                        std::to_string(total));
      }
    }
  }
}

Eigen::VectorXd CensusTable::axis_weights(
    Country country, Axis axis,
    const std::vector<std::string>& group_labels) const {
  auto it = countries.find(country);
  if (it == countries.end()) {
    throw Error(ErrorCode::kMissingCensus,
                "no census for " + std::string(country_name(country)));
  }
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(group_labels.size()));
  for (const auto& [label, weight] : it->second.axes[axis_slot(axis)]) {
    auto pos = std::find(group_labels.begin(), group_labels.end(), label);
    if (pos == group_labels.end()) {
      throw Error(ErrorCode::kUnknownGroup,
                  "census group " + label + " is not indexed");
    }
    dense[pos - group_labels.begin()] = weight;
  }
  return dense;
}

CountryMix CensusTable::default_mix() const {
  CountryMix mix;
  double total = 0.0;
  for (const auto& [country, entry] : countries) total += entry.population;
  for (const auto& [country, entry] : countries) {
    mix[country] = total > 0.0 ? entry.population / total
                               : 1.0 / static_cast<double>(countries.size());
  }
  return mix;
}

PopulationWeights PopulationWeights::resolve(
    const CensusTable& census, Country country,
    const std::array<std::vector<std::string>, kNumAxes>& group_labels) {
  PopulationWeights weights;
  for (Axis axis : kAllAxes) {
    weights.axes[axis_slot(axis)] =
        census.axis_weights(country, axis, group_labels[axis_slot(axis)]);
  }
  return weights;
}

Eigen::VectorXd population_skill(const DrawSnapshot& draw,
                                 const PopulationWeights& weights,
                                 double alpha) {
  Eigen::VectorXd skill = draw.theta;
  for (int slot = 0; slot < kNumAxes; ++slot) {
    if (draw.adjust[slot].cols() != weights.axes[slot].size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "census weights do not match the draw's groups");
    }
    if (weights.axes[slot].size() == 0) continue;
    skill += alpha * (draw.adjust[slot] * weights.axes[slot]);
  }
  return skill;
}

Eigen::VectorXd population_skill(const DrawSnapshot& draw,
                                 const CensusTable& census, Country country,
                                 const PosteriorDraws& context) {
  return population_skill(
      draw, PopulationWeights::resolve(census, country, context.group_labels),
      context.spec.alpha);
}

double expected_points(double theta_i, double theta_j, double nu) {
  if (!(nu > 0.0)) {
    throw Error(ErrorCode::kNonPositiveNu, "tie propensity must be positive");
  }
  const double eta = theta_i - theta_j;
  if (eta == 0.0) return 0.5;
  // Evaluate the favoured side and mirror it so the pair sums to exactly 1.
  if (eta < 0.0) return 1.0 - expected_points(theta_j, theta_i, nu);
  const OutcomeProbs probs = outcome_probs(eta, nu);
  return probs.p_a + 0.5 * probs.p_t;
}

std::vector<double> score_per_draw(const Eigen::VectorXd& theta_pop, double nu) {
  const auto n = static_cast<int>(theta_pop.size());
  if (n < 2) throw Error(ErrorCode::kTooFewModels, "need >= 2 models to score");
  std::vector<double> scores(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double ep = expected_points(theta_pop[i], theta_pop[j], nu);
      scores[i] += ep;
      scores[j] += 1.0 - ep;
    }
  }
  return scores;
}

std::vector<int> ranks_by_score(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    ranks[order[r]] = static_cast<int>(r) + 1;
  }
  return ranks;
}

std::vector<LeaderboardEntry> leaderboard(const PosteriorDraws& draws,
                                          const CensusTable& census,
                                          const CountryMix& country_mix) {
  if (draws.empty()) throw Error(ErrorCode::kEmptyDraws, "no posterior draws");
  double total = 0.0;
  std::vector<std::pair<double, PopulationWeights>> parts;
  for (const auto& [country, weight] : country_mix) {
    if (weight < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "negative country weight");
    }
    total += weight;
    if (weight == 0.0) continue;
    parts.emplace_back(weight, PopulationWeights::resolve(census, country,
                                                          draws.group_labels));
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "country mix must sum to 1");
  }
  const double alpha = draws.spec.alpha;
  SkillFn skill = [&](const DrawSnapshot& draw) {
    Eigen::VectorXd combined = Eigen::VectorXd::Zero(draw.theta.size());
    for (const auto& [weight, resolved] : parts) {
      combined += weight * population_skill(draw, resolved, alpha);
    }
    return combined;
  };
  return entries_of(draws, aggregate(draws, skill));
}

std::vector<LeaderboardEntry> baseline_leaderboard(const PosteriorDraws& draws) {
  return entries_of(draws, aggregate(draws, [](const DrawSnapshot& draw) {
                      return draw.theta;
                    }));
}

std::vector<LeaderboardEntry> group_leaderboard(const PosteriorDraws& draws,
                                                Axis axis,
                                                const std::string& group) {
  const int g = group_position(draws, axis, group);
  const int slot = axis_slot(axis);
  const double alpha = draws.spec.alpha;
  return entries_of(draws, aggregate(draws, [&](const DrawSnapshot& draw) {
                      Eigen::VectorXd skill =
                          draw.theta + alpha * draw.adjust[slot].col(g);
                      return skill;
                    }));
}

RankShiftReport rank_shift_report(const PosteriorDraws& draws, Axis axis) {
  const int slot = axis_slot(axis);
  const int groups = draws.spec.n_groups[slot];
  if (groups < 2) {
    throw Error(ErrorCode::kTooFewGroups,
                std::string(axis_name(axis)) + " axis has fewer than 2 groups");
  }
  const int n = draws.spec.n_models;
  const double alpha = draws.spec.alpha;
  RankShiftReport report;
  report.axis = axis;
  for (int i = 0; i < n; ++i) {
    report.models.push_back(i < static_cast<int>(draws.model_labels.size())
                                ? draws.model_labels[i]
                                : std::to_string(i));
  }
  report.groups = draws.group_labels[slot];
  // Overall ranking weights every group of the axis equally.
  report.overall_rank =
      aggregate(draws, [&](const DrawSnapshot& draw) {
        Eigen::VectorXd skill =
            draw.theta + alpha * draw.adjust[slot].rowwise().mean();
        return skill;
      }).expected_rank();
  report.group_rank.resize(n, groups);
  for (int g = 0; g < groups; ++g) {
    report.group_rank.col(g) =
        aggregate(draws, [&](const DrawSnapshot& draw) {
          Eigen::VectorXd skill = draw.theta + alpha * draw.adjust[slot].col(g);
          return skill;
        }).expected_rank();
  }
  report.model_shift =
      (report.group_rank.colwise() - report.overall_rank).cwiseAbs().rowwise().mean();
  report.axis_shift = report.model_shift.mean();
  return report;
}

std::vector<TieRateReport> empirical_tie_rates(const Dataset& dataset,
                                               TieGrouping grouping) {
  if (dataset.records.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no records to tabulate");
  }
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::pair<int, int>> cells;  // (ties, total)
  for (const auto& record : dataset.records) {
    const int tie = record.outcome == Outcome::kTie ? 1 : 0;
    if (grouping == TieGrouping::kByMetric) {
      auto& cell = cells[{record.metric, ""}];
      cell.first += tie;
      cell.second += 1;
      continue;
    }
    for (const auto& age : record.rater.groups(Axis::kAge)) {
      const std::string metric =
          grouping == TieGrouping::kByMetricAndAge ? record.metric : "";
      auto& cell = cells[{metric, age}];
      cell.first += tie;
      cell.second += 1;
    }
  }
  std::vector<TieRateReport> reports;
  for (const auto& [key, counts] : cells) {
    TieRateReport report;
    if (grouping != TieGrouping::kByAgeGroup) report.metric = key.first;
    if (grouping != TieGrouping::kByMetric) report.age_group = key.second;
    report.n = counts.second;
    report.tie_rate = static_cast<double>(counts.first) / counts.second;
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace arena
