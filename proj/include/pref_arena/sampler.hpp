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

// Hamiltonian Monte Carlo over the likelihood module's unconstrained
// coordinates, plus split-Rhat / rank-normalised ESS diagnostics.
//
// Warmup follows the usual windowed scheme: a fast initial buffer, doubling
// slow windows that re-estimate a diagonal inverse metric, and a terminal
// buffer. Step size is tuned by dual averaging toward target_accept during
// the whole warmup. Each transition integrates a uniformly jittered number
// of leapfrog steps in [1, max_steps], where max_steps covers a fixed
// integration time at the current step size (capped by max_leapfrog_steps).
//
// Chain c draws from its own mt19937_64 stream seeded with
// splitmix64(seed ^ splitmix64(c + 1)); adding chains never changes the
// streams of existing ones.

#ifndef PREF_ARENA_SAMPLER_HPP_
#define PREF_ARENA_SAMPLER_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pref_arena/likelihood.hpp"

namespace arena {

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_draws = 1000;
  double target_accept = 0.8;
  std::uint64_t seed = 0;
  int max_leapfrog_steps = 1024;
  // Upper end of the jittered integration time, in whitened units.
  double max_integration_time = 3.0;
  // Run chains on separate threads. Results do not depend on this.
  bool parallel = true;

  void validate() const;
};

// Hamiltonian energy error above this marks a transition divergent.
inline constexpr double kDivergenceThreshold = 1000.0;

// Constrained-space parameters of one draw.
struct DrawSnapshot {
  int chain = 0;
  int iteration = 0;
  Eigen::VectorXd theta;                          // zero-sum skills
  std::array<Eigen::MatrixXd, kNumAxes> adjust;   // centred, scaled by tau
  Eigen::Vector3d tau = Eigen::Vector3d::Ones();
  double nu = 1.0;

  static DrawSnapshot from_state(const ParameterState& state,
                                 const ModelSpec& spec);
  // theta, adjustments (per axis, row-major), tau, nu.
  Eigen::VectorXd flatten() const;
};

struct PosteriorDraws {
  ModelSpec spec;
  std::string metric;
  std::vector<std::string> model_labels;
  std::array<std::vector<std::string>, kNumAxes> group_labels;
  int n_chains = 0;
  int n_draws_per_chain = 0;
  std::vector<DrawSnapshot> draws;  // chain-major
  int divergence_count = 0;
  std::vector<double> acceptance_rate;  // per chain, post-warmup mean
  std::vector<double> step_size;        // per chain, adapted

  bool empty() const { return draws.empty(); }
  // Names matching DrawSnapshot::flatten, e.g. "theta[m]", "u_age[m,g]".
  std::vector<std::string> scalar_names() const;
};

struct Diagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  std::vector<double> ess;
  std::vector<double> acceptance_rate;
  int divergence_count = 0;

  double max_rhat() const;
  double min_ess() const;
};

// Returned for Rhat when chains have zero within-chain spread but differ.
inline constexpr double kRhatSentinel = 1e6;

// Log density with optional gradient output. Must be reentrant.
using LogDensityFn =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct PhasePoint {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  Eigen::VectorXd gradient;  // of the log density at position
  double log_density = 0.0;
};

// One leapfrog step against U = -log density with a diagonal inverse metric.
// Throws kNonFiniteGradient if the new gradient or density is not finite.
PhasePoint leapfrog_step(const PhasePoint& point, double step_size,
                         const Eigen::VectorXd& inverse_metric,
                         const LogDensityFn& log_density);

// Unit-metric convenience form.
std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog_step(
    const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
    double step_size, const LogDensityFn& log_density);

// Chain-level driver over an arbitrary log density; returns unconstrained
// draws (chain-major) and per-chain statistics.
struct RawChains {
  std::vector<Eigen::VectorXd> draws;
  std::vector<double> acceptance_rate;
  std::vector<double> step_size;
  int divergence_count = 0;
};
RawChains run_hmc(const LogDensityFn& log_density, int dimension,
                  const SamplerConfig& config);

PosteriorDraws sample_posterior(const MetricData& data, const ModelSpec& spec,
                                const SamplerConfig& config);

// Fits one metric of a dataset, labelling the draws with its models and
// groups.
PosteriorDraws fit_metric(const Dataset& dataset, const MetricRef& metric,
                          const SamplerConfig& config);

Diagnostics compute_diagnostics(const PosteriorDraws& draws);

// Split-Rhat and ESS on a (draws x chains) matrix, rank-normalised.
double split_rhat(const Eigen::MatrixXd& chains);
double effective_sample_size(const Eigen::MatrixXd& chains);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t chain_seed(std::uint64_t seed, int chain);

}  // namespace arena

#endif  // PREF_ARENA_SAMPLER_HPP_
