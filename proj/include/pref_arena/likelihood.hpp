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

// Bradley-Terry-Davidson likelihood with hierarchical demographic
// adjustments, its priors, and the closed-form gradient used by the sampler.
//
// Unconstrained coordinates, in flat order:
//   theta_free  (n_models - 1)        skills in an orthonormal sum-to-zero basis
//   u_raw[axis] (n_models x n_groups) raw adjustments, row-major, per axis
//   log_tau     (3)                   per-axis heterogeneity scale
//   log_nu      (1)                   tie propensity
//
// Priors: theta_free ~ N(0, theta_prior_sd), u_raw ~ N(0, 1),
// tau ~ Exponential(tau_prior_rate) (with the log-transform Jacobian),
// log_nu ~ N(0, log_nu_prior_sd).

#ifndef PREF_ARENA_LIKELIHOOD_HPP_
#define PREF_ARENA_LIKELIHOOD_HPP_

#include <array>
#include <cmath>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pref_arena/core.hpp"

namespace arena {

struct ModelSpec {
  int n_models = 2;
  // Zero groups on an axis is legal: that axis then contributes nothing.
  std::array<int, kNumAxes> n_groups = {0, 0, 0};
  double alpha = 1.0 / std::sqrt(3.0);
  double tau_prior_rate = 12.0;
  double theta_prior_sd = 1.0;
  double log_nu_prior_sd = 1.0;

  static ModelSpec for_dataset(const Dataset& dataset);
  void validate() const;
  int dimension() const;
  int u_offset(Axis axis) const;
  int log_tau_offset() const;
  int log_nu_offset() const { return dimension() - 1; }
};

struct ParameterState {
  Eigen::VectorXd theta_free;
  std::array<Eigen::MatrixXd, kNumAxes> u_raw;
  Eigen::Vector3d log_tau = Eigen::Vector3d::Zero();
  double log_nu = 0.0;

  static ParameterState zeros(const ModelSpec& spec);
  static ParameterState from_flat(const ModelSpec& spec,
                                  const Eigen::VectorXd& flat);
  Eigen::VectorXd to_flat() const;
  // Throws kDimensionMismatch if the shapes disagree with `spec`.
  void check_shape(const ModelSpec& spec) const;

  double tau(Axis axis) const { return std::exp(log_tau[axis_slot(axis)]); }
  double nu() const { return std::exp(log_nu); }
};

// n x (n-1) matrix with orthonormal columns, each orthogonal to the ones
// vector (Helmert contrasts).
Eigen::MatrixXd sum_to_zero_basis(int n_models);
// Full zero-sum skill vector from free coordinates.
Eigen::VectorXd expand_theta(const Eigen::VectorXd& theta_free);
// Free coordinates of a zero-sum skill vector.
Eigen::VectorXd contract_theta(const Eigen::VectorXd& theta);

struct OutcomeProbs {
  double p_a = 0.0;
  double p_t = 0.0;
  double p_b = 0.0;

  double of(Outcome outcome) const {
    switch (outcome) {
      case Outcome::kWinA: return p_a;
      case Outcome::kTie: return p_t;
      case Outcome::kWinB: return p_b;
    }
    return 0.0;
  }
};

// Davidson tie model. Stable for |eta| up to ~700 and any positive nu.
OutcomeProbs outcome_probs(double eta, double nu);
// Same as outcome_probs with nu supplied on the log scale.
OutcomeProbs outcome_probs_log_nu(double eta, double log_nu);

// Row-centred raw adjustments scaled by tau.
Eigen::MatrixXd centered_adjustments(const Eigen::MatrixXd& u_raw, double tau);
Eigen::MatrixXd centered_adjustments(const ParameterState& state, Axis axis);

// Sparse per-axis membership weights of one rater.
struct RaterWeights {
  std::array<std::vector<std::pair<int, double>>, kNumAxes> axes;

  static RaterWeights of(const RaterProfile& rater, const Dataset& dataset);
  auto operator<=>(const RaterWeights&) const = default;
};

double latent_advantage(const ParameterState& state, int model_a, int model_b,
                        const RaterWeights& weights, const ModelSpec& spec);
double latent_advantage(const ParameterState& state,
                        const ComparisonRecord& record, const Dataset& dataset,
                        const ModelSpec& spec);

// Identical (pair, rater weights) comparisons collapsed into outcome counts.
struct ComparisonPattern {
  int model_a = 0;
  int model_b = 0;
  RaterWeights weights;
  std::array<double, 3> counts = {0.0, 0.0, 0.0};  // A, tie, B
};

// The records of one metric, compiled against a dataset's indices.
class MetricData {
 public:
  MetricData() = default;
  MetricData(int n_models, std::array<int, kNumAxes> n_groups)
      : n_models_(n_models), n_groups_(n_groups) {}

  static MetricData compile(const Dataset& dataset, std::string_view metric);

  void add(int model_a, int model_b, const RaterWeights& weights,
           Outcome outcome, double count = 1.0);

  int n_models() const { return n_models_; }
  const std::array<int, kNumAxes>& n_groups() const { return n_groups_; }
  const std::vector<ComparisonPattern>& patterns() const { return patterns_; }
  double n_records() const { return n_records_; }
  bool empty() const { return patterns_.empty(); }

 private:
  int n_models_ = 0;
  std::array<int, kNumAxes> n_groups_ = {0, 0, 0};
  std::vector<ComparisonPattern> patterns_;
  std::map<std::pair<std::pair<int, int>, RaterWeights>, std::size_t> lookup_;
  double n_records_ = 0.0;
};

double log_prior(const ParameterState& state, const ModelSpec& spec);
double log_posterior(const ParameterState& state, const MetricData& data,
                     const ModelSpec& spec);
ParameterState grad_log_posterior(const ParameterState& state,
                                  const MetricData& data,
                                  const ModelSpec& spec);

// Flat-vector entry point for the sampler: returns the log posterior and, when
// `gradient` is non-null, writes its gradient. Reentrant.
double log_posterior_flat(const ModelSpec& spec, const MetricData& data,
                          const Eigen::VectorXd& flat,
                          Eigen::VectorXd* gradient);

}  // namespace arena

#endif  // PREF_ARENA_LIKELIHOOD_HPP_
