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

// Synthetic ground truth, rater populations and data-collection campaigns.
// Everything here is the generative mirror of the likelihood module and is
// used to check that inference recovers what was planted.

#ifndef PREF_ARENA_SIMULATOR_HPP_
#define PREF_ARENA_SIMULATOR_HPP_

#include <array>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pref_arena/core.hpp"
#include "pref_arena/likelihood.hpp"
#include "pref_arena/matchmaker.hpp"
#include "pref_arena/sampler.hpp"
#include "pref_arena/scoring.hpp"

namespace arena {

// Labels of a synthetic study: models, metrics and qualified group labels.
struct StudyDesign {
  std::vector<ModelRef> models;
  std::vector<MetricRef> metrics;
  std::array<std::vector<std::string>, kNumAxes> groups;

  // `n_models` models, one metric ("overall"), three age groups and three
  // ethnicity and politics groups per country.
  static StudyDesign desk_scale(int n_models = 6);
  ModelSpec model_spec() const;
};

struct GroundTruth {
  StudyDesign design;
  double alpha = 1.0 / std::sqrt(3.0);
  Eigen::MatrixXd theta_star;  // model x metric, columns sum to zero
  // u_star[metric][axis]: model x group, rows centred.
  std::vector<std::array<Eigen::MatrixXd, kNumAxes>> u_star;
  Eigen::MatrixXd tau_star;    // metric x axis
  Eigen::VectorXd nu_star;     // per metric

  int metric_position(const MetricRef& metric) const;
  // The truth for one metric as a single posterior draw.
  DrawSnapshot snapshot(int metric) const;
  PosteriorDraws as_draws(int metric) const;
};

// theta* ~ N(0, theta_sd) then centred; u* ~ N(0,1), row-centred and scaled
// by the per-axis heterogeneity target. nu* is taken per metric from
// `nu_star` (its last value is reused for any remaining metrics).
GroundTruth sample_ground_truth(const StudyDesign& design,
                                const std::array<double, kNumAxes>& heterogeneity,
                                const std::vector<double>& nu_star,
                                std::mt19937_64& rng, double theta_sd = 1.0);

// Tie propensity for which uniformly paired comparisons at skills `theta`
// tie at `target_tie_rate` on average.
double calibrate_nu(const Eigen::VectorXd& theta, double target_tie_rate);

struct PopulationSpec {
  std::map<Country, double> country_share;
  // Per country and axis: distribution over qualified group labels.
  std::map<Country, std::array<std::map<std::string, double>, kNumAxes>>
      membership;
  // Probability that a rater lists a second group on the axis.
  std::array<double, kNumAxes> p_multi = {0.0, 0.1, 0.1};
  // Probability that the axis is unobserved for a rater.
  std::array<double, kNumAxes> p_missing = {0.0, 0.05, 0.05};

  // Equal country shares, uniform over each country's groups.
  static PopulationSpec uniform(const StudyDesign& design);
  // Over-represents the first group of every axis (sample != census).
  static PopulationSpec skewed(const StudyDesign& design);
  void validate() const;
  RaterProfile sample_rater(std::mt19937_64& rng) const;
  // Census table implied by these proportions.
  CensusTable as_census() const;
};

// Recruitment tournaments a rater qualifies for: one per (country, group).
std::vector<std::string> eligible_strata(const RaterProfile& rater);

Outcome simulate_comparison(const GroundTruth& truth, const RaterProfile& rater,
                            int model_a, int model_b, int metric,
                            std::mt19937_64& rng);

enum class Pairing { kUniform, kAdaptive };

struct CampaignOptions {
  MatchConfig match;
  // Metric whose outcome feeds the adaptive tournaments.
  int primary_metric = 0;
  // Run every comparison in one tournament instead of per-stratum ones.
  bool single_tournament = false;
};

// n comparison sessions; each yields one record per metric of the truth.
// Records are in session order and indexed against the truth's labels.
Dataset run_campaign(const GroundTruth& truth, const PopulationSpec& population,
                     Pairing pairing, int n_comparisons, std::mt19937_64& rng,
                     const CampaignOptions& options = {});

struct RecoveryMetrics {
  double spearman_theta = 0.0;
  double ci_coverage = 0.0;
  Eigen::Vector3d tau_error = Eigen::Vector3d::Zero();
  double nu_error = 0.0;
};

RecoveryMetrics recovery_metrics(const PosteriorDraws& draws,
                                 const GroundTruth& truth,
                                 const MetricRef& metric);

// Posterior mode of the skills for a model without demographic terms, found
// by damped Newton iterations. Used for cheap ranking checkpoints.
Eigen::VectorXd point_estimate_theta(const Dataset& dataset,
                                     const MetricRef& metric,
                                     std::size_t record_limit);

}  // namespace arena

#endif  // PREF_ARENA_SIMULATOR_HPP_
