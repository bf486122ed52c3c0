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

#include "pref_arena/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "pref_arena/error.hpp"

namespace arena {
namespace {

struct DualAveraging {
  double target = 0.8;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double mu = 0.0;
  double log_step_bar = 0.0;
  double h_bar = 0.0;
  int count = 0;

  void restart(double step_size) {
    mu = std::log(10.0 * step_size);
    log_step_bar = 0.0;
    h_bar = 0.0;
    count = 0;
  }

  double update(double accept_stat) {
    ++count;
    const double weight = 1.0 / (count + t0);
    h_bar = (1.0 - weight) * h_bar + weight * (target - accept_stat);
    const double log_step = mu - std::sqrt(static_cast<double>(count)) / gamma * h_bar;
    const double decay = std::pow(static_cast<double>(count), -kappa);
    log_step_bar = decay * log_step + (1.0 - decay) * log_step_bar;
    return std::exp(log_step);
  }

  double adapted() const { return std::exp(log_step_bar); }
};

// Iterations (exclusive ends) at which the slow metric windows close.
std::vector<int> window_ends(int n_warmup, int* init_buffer) {
  std::vector<int> ends;
  *init_buffer = n_warmup;
  if (n_warmup < 20) return ends;
  int init = 75;
  int term = 50;
  int base = 25;
  if (init + term + base > n_warmup) {
    init = static_cast<int>(0.15 * n_warmup);
    term = static_cast<int>(0.1 * n_warmup);
    base = n_warmup - init - term;
  }
  *init_buffer = init;
  const int last = n_warmup - term;
  int start = init;
  int window = base;
  while (start < last) {
    int end = start + window;
    if (end + 2 * window > last) end = last;
    ends.push_back(end);
    start = end;
    window *= 2;
  }
  return ends;
}

class Chain {
 public:
  Chain(const LogDensityFn& log_density, int dimension,
        const SamplerConfig& config, int index)
      : log_density_(log_density),
        config_(config),
        rng_(chain_seed(config.seed, index)),
        inverse_metric_(Eigen::VectorXd::Ones(dimension)) {
    initialize(dimension);
  }

  void run(std::vector<Eigen::VectorXd>& draws) {
    warmup();
    double accept_sum = 0.0;
    int divergent = 0;
    draws.reserve(config_.n_draws);
    for (int i = 0; i < config_.n_draws; ++i) {
      auto [accept, is_divergent] = transition(step_size_);
      accept_sum += accept;
      divergent += is_divergent ? 1 : 0;
      draws.push_back(current_.position);
    }
    acceptance_ = config_.n_draws > 0 ? accept_sum / config_.n_draws : 0.0;
    divergences_ = divergent;
  }

  double acceptance() const { return acceptance_; }
  int divergences() const { return divergences_; }
  double step_size() const { return step_size_; }

 private:
  void initialize(int dimension) {
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd position(dimension);
      for (int k = 0; k < dimension; ++k) position[k] = uniform(rng_);
      Eigen::VectorXd gradient;
      const double value = log_density_(position, &gradient);
      if (std::isfinite(value) && gradient.allFinite()) {
        current_ = PhasePoint{position, Eigen::VectorXd::Zero(dimension),
                              gradient, value};
        return;
      }
    }
    throw Error(ErrorCode::kNonFiniteGradient,
                "no finite starting point after 100 attempts");
  }

  Eigen::VectorXd draw_momentum() {
    Eigen::VectorXd momentum(inverse_metric_.size());
    for (Eigen::Index k = 0; k < momentum.size(); ++k) {
      momentum[k] = normal_(rng_) / std::sqrt(inverse_metric_[k]);
    }
    return momentum;
  }

  double hamiltonian(const PhasePoint& point) const {
    return -point.log_density +
           0.5 * point.momentum.cwiseAbs2().dot(inverse_metric_);
  }

  int max_steps(double step_size) const {
    const double steps = std::ceil(config_.max_integration_time / step_size);
    if (!std::isfinite(steps)) return config_.max_leapfrog_steps;
    return static_cast<int>(
        std::clamp(steps, 1.0, static_cast<double>(config_.max_leapfrog_steps)));
  }

  // Returns the acceptance statistic and whether the trajectory diverged.
  std::pair<double, bool> transition(double step_size) {
    std::uniform_int_distribution<int> jitter(1, max_steps(step_size));
    const int steps = jitter(rng_);
    PhasePoint point = current_;
    point.momentum = draw_momentum();
    const double initial = hamiltonian(point);
    bool divergent = false;
    try {
      for (int s = 0; s < steps; ++s) {
        point = leapfrog_step(point, step_size, inverse_metric_, log_density_);
        if (!(std::abs(hamiltonian(point) - initial) <= kDivergenceThreshold)) {
          divergent = true;
          break;
        }
      }
    } catch (const Error& error) {
      if (error.code() != ErrorCode::kNonFiniteGradient) throw;
      divergent = true;
    }
    if (divergent) return {0.0, true};
    const double log_ratio = initial - hamiltonian(point);
    const double accept = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (uniform_(rng_) < accept) current_ = std::move(point);
    return {accept, false};
  }

  double find_reasonable_step_size(double step_size) {
    constexpr double kLogThreshold = -0.22314355131420976;  // log 0.8
    auto log_accept = [&](double eps) {
      PhasePoint point = current_;
      point.momentum = draw_momentum();
      const double initial = hamiltonian(point);
      try {
        point = leapfrog_step(point, eps, inverse_metric_, log_density_);
      } catch (const Error& error) {
        if (error.code() != ErrorCode::kNonFiniteGradient) throw;
        return -std::numeric_limits<double>::infinity();
      }
      const double delta = initial - hamiltonian(point);
      return std::isfinite(delta) ? delta
                                  : -std::numeric_limits<double>::infinity();
    };
    const int direction = log_accept(step_size) > kLogThreshold ? 1 : -1;
    for (int i = 0; i < 60; ++i) {
      const double next = direction > 0 ? step_size * 2.0 : step_size * 0.5;
      const bool above = log_accept(next) > kLogThreshold;
      if (direction > 0 && !above) break;
      step_size = next;
      if (direction < 0 && above) break;
    }
    return step_size;
  }

  void warmup() {
    step_size_ = find_reasonable_step_size(1.0);
    DualAveraging adapt;
    adapt.target = config_.target_accept;
    adapt.restart(step_size_);
    int init_buffer = 0;
    const std::vector<int> ends = window_ends(config_.n_warmup, &init_buffer);
    std::size_t next_window = 0;
    int window_start = init_buffer;
    const Eigen::Index dim = inverse_metric_.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
    int samples = 0;

    for (int i = 0; i < config_.n_warmup; ++i) {
      auto [accept, divergent] = transition(step_size_);
      (void)divergent;
      step_size_ = adapt.update(accept);
      if (next_window < ends.size() && i >= window_start) {
        ++samples;
        const Eigen::VectorXd delta = current_.position - mean;
        mean += delta / samples;
        m2 += delta.cwiseProduct(current_.position - mean);
        if (i + 1 == ends[next_window]) {
          const double n = samples;
          Eigen::VectorXd variance = m2 / std::max(n - 1.0, 1.0);
          inverse_metric_ =
              (n / (n + 5.0)) * variance.array() + 1e-3 * (5.0 / (n + 5.0));
          step_size_ = find_reasonable_step_size(step_size_);
          adapt.restart(step_size_);
          mean.setZero();
          m2.setZero();
          samples = 0;
          window_start = ends[next_window];
          ++next_window;
        }
      }
    }
    if (config_.n_warmup > 0) step_size_ = adapt.adapted();
  }

  const LogDensityFn& log_density_;
  const SamplerConfig& config_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  Eigen::VectorXd inverse_metric_;
  PhasePoint current_;
  double step_size_ = 1.0;
  double acceptance_ = 0.0;
  int divergences_ = 0;
};

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(chain) + 1));
}

void SamplerConfig::validate() const {
  if (n_chains < 1 || n_warmup < 0 || n_draws < 1 || max_leapfrog_steps < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "sampler needs >= 1 chain, >= 1 draw and >= 1 leapfrog step");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target_accept must be in (0,1)");
  }
  if (!(max_integration_time > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "max_integration_time must be positive");
  }
}

PhasePoint leapfrog_step(const PhasePoint& point, double step_size,
                         const Eigen::VectorXd& inverse_metric,
                         const LogDensityFn& log_density) {
  PhasePoint next;
  next.momentum = point.momentum + 0.5 * step_size * point.gradient;
  next.position =
      point.position + step_size * inverse_metric.cwiseProduct(next.momentum);
  next.log_density = log_density(next.position, &next.gradient);
  if (!std::isfinite(next.log_density) || !next.gradient.allFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient,
                "log density or gradient not finite after leapfrog step");
  }
  next.momentum += 0.5 * step_size * next.gradient;
  return next;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog_step(
    const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
    double step_size, const LogDensityFn& log_density) {
  PhasePoint point;
  point.position = position;
  point.momentum = momentum;
  point.log_density = log_density(position, &point.gradient);
  if (!std::isfinite(point.log_density) || !point.gradient.allFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient, "non-finite starting gradient");
  }
  PhasePoint next = leapfrog_step(
      point, step_size, Eigen::VectorXd::Ones(position.size()), log_density);
  return {std::move(next.position), std::move(next.momentum)};
}

RawChains run_hmc(const LogDensityFn& log_density, int dimension,
                  const SamplerConfig& config) {
  config.validate();
  const int n_chains = config.n_chains;
  std::vector<std::vector<Eigen::VectorXd>> per_chain(n_chains);
  std::vector<double> acceptance(n_chains, 0.0);
  std::vector<double> step_size(n_chains, 0.0);
  std::vector<int> divergences(n_chains, 0);
  std::vector<std::exception_ptr> failures(n_chains);
  RawChains out;

  auto run_chain = [&](int c) {
    try {
      Chain chain(log_density, dimension, config, c);
      chain.run(per_chain[c]);
      acceptance[c] = chain.acceptance();
      step_size[c] = chain.step_size();
      divergences[c] = chain.divergences();
    } catch (...) {
      failures[c] = std::current_exception();
    }
  };
  if (config.parallel && n_chains > 1) {
    std::vector<std::thread> threads;
    threads.reserve(n_chains);
    for (int c = 0; c < n_chains; ++c) threads.emplace_back(run_chain, c);
    for (auto& thread : threads) thread.join();
  } else {
    for (int c = 0; c < n_chains; ++c) run_chain(c);
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  for (int c = 0; c < n_chains; ++c) {
    for (auto& draw : per_chain[c]) out.draws.push_back(std::move(draw));
    out.divergence_count += divergences[c];
  }
  out.acceptance_rate = std::move(acceptance);
  out.step_size = std::move(step_size);
  return out;
}

DrawSnapshot DrawSnapshot::from_state(const ParameterState& state,
                                      const ModelSpec& spec) {
  DrawSnapshot snapshot;
  snapshot.theta = expand_theta(state.theta_free);
  for (Axis axis : kAllAxes) {
    snapshot.adjust[axis_slot(axis)] = centered_adjustments(state, axis);
    snapshot.tau[axis_slot(axis)] = state.tau(axis);
  }
  snapshot.nu = state.nu();
  (void)spec;
  return snapshot;
}

Eigen::VectorXd DrawSnapshot::flatten() const {
  Eigen::Index size = theta.size() + kNumAxes + 1;
  for (const auto& a : adjust) size += a.size();
  Eigen::VectorXd flat(size);
  Eigen::Index offset = 0;
  flat.segment(offset, theta.size()) = theta;
  offset += theta.size();
  for (const auto& a : adjust) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index g = 0; g < a.cols(); ++g) flat[offset++] = a(i, g);
    }
  }
  flat.segment<3>(offset) = tau;
  flat[offset + 3] = nu;
  return flat;
}

std::vector<std::string> PosteriorDraws::scalar_names() const {
  auto model = [&](int i) {
    return i < static_cast<int>(model_labels.size()) ? model_labels[i]
                                                     : std::to_string(i);
  };
  std::vector<std::string> names;
  for (int i = 0; i < spec.n_models; ++i) {
    names.push_back("theta[" + model(i) + "]");
  }
  for (Axis axis : kAllAxes) {
    const int slot = axis_slot(axis);
    const auto& labels = group_labels[slot];
    for (int i = 0; i < spec.n_models; ++i) {
      for (int g = 0; g < spec.n_groups[slot]; ++g) {
        const std::string group = g < static_cast<int>(labels.size())
                                      ? labels[g]
                                      : std::to_string(g);
        names.push_back("u_" + std::string(axis_name(axis)) + "[" + model(i) +
                        "," + group + "]");
      }
    }
  }
  for (Axis axis : kAllAxes) {
    names.push_back("tau_" + std::string(axis_name(axis)));
  }
  names.push_back("nu");
  return names;
}

PosteriorDraws sample_posterior(const MetricData& data, const ModelSpec& spec,
                                const SamplerConfig& config) {
  spec.validate();
  config.validate();
  if (data.n_models() != spec.n_models || data.n_groups() != spec.n_groups) {
    throw Error(ErrorCode::kDimensionMismatch,
                "metric data does not match the model spec");
  }
  LogDensityFn density = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    return log_posterior_flat(spec, data, x, g);
  };
  RawChains raw = run_hmc(density, spec.dimension(), config);

  PosteriorDraws out;
  out.spec = spec;
  out.n_chains = config.n_chains;
  out.n_draws_per_chain = config.n_draws;
  out.divergence_count = raw.divergence_count;
  out.acceptance_rate = raw.acceptance_rate;
  out.step_size = raw.step_size;
  out.draws.reserve(raw.draws.size());
  for (std::size_t k = 0; k < raw.draws.size(); ++k) {
    DrawSnapshot snapshot = DrawSnapshot::from_state(
        ParameterState::from_flat(spec, raw.draws[k]), spec);
    snapshot.chain = static_cast<int>(k) / config.n_draws;
    snapshot.iteration = static_cast<int>(k) % config.n_draws;
    out.draws.push_back(std::move(snapshot));
  }
  const double post_warmup = static_cast<double>(config.n_chains) * config.n_draws;
  if (out.divergence_count > 0.1 * post_warmup) {
    throw Error(ErrorCode::kDivergenceFlood,
                std::to_string(out.divergence_count) + " of " +
                    std::to_string(static_cast<long>(post_warmup)) +
                    " post-warmup transitions diverged");
  }
  return out;
}

PosteriorDraws fit_metric(const Dataset& dataset, const MetricRef& metric,
                          const SamplerConfig& config) {
  const ModelSpec spec = ModelSpec::for_dataset(dataset);
  const MetricData data = MetricData::compile(dataset, metric);
  PosteriorDraws draws = sample_posterior(data, spec, config);
  draws.metric = metric;
  draws.model_labels = dataset.models.labels();
  for (int slot = 0; slot < kNumAxes; ++slot) {
    draws.group_labels[slot] = dataset.groups[slot].labels();
  }
  return draws;
}

}  // namespace arena
