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

#include "pref_arena/likelihood.hpp"

#include <algorithm>
#include <numbers>

#include "pref_arena/error.hpp"

namespace arena {
namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// theta = H x for the Helmert basis H, in O(n).
void helmert_apply(const double* free, int n, double* theta) {
  double suffix = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    // Columns k >= i contribute 1/sqrt((k+1)(k+2)) to row i.
    theta[i] = suffix;
    if (i >= 1) {
      const double k1 = i;  // column k = i-1, k+1 = i
      theta[i] -= k1 / std::sqrt(k1 * (k1 + 1.0)) * free[i - 1];
      suffix += free[i - 1] / std::sqrt(k1 * (k1 + 1.0));
    }
  }
}

// x = H^T theta, in O(n).
void helmert_apply_transpose(const double* theta, int n, double* free) {
  double prefix = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    prefix += theta[k];
    const double k1 = k + 1.0;
    const double norm = std::sqrt(k1 * (k1 + 1.0));
    free[k] = (prefix - k1 * theta[k + 1]) / norm;
  }
}

double log_sum_probs(double eta, double log_nu, double* p_a, double* p_t,
                     double* p_b) {
  const double top = std::max(std::abs(eta), log_nu);
  const double ea = std::exp(eta - top);
  const double eb = std::exp(-eta - top);
  const double et = std::exp(log_nu - top);
  const double z = ea + eb + et;
  *p_a = ea / z;
  *p_t = et / z;
  *p_b = eb / z;
  return top + std::log(z);
}

void check_data_shape(const ModelSpec& spec, const MetricData& data) {
  if (data.n_models() != spec.n_models || data.n_groups() != spec.n_groups) {
    throw Error(ErrorCode::kDimensionMismatch,
                "metric data indexed for " + std::to_string(data.n_models()) +
                    " models, spec has " + std::to_string(spec.n_models));
  }
}

}  // namespace

ModelSpec ModelSpec::for_dataset(const Dataset& dataset) {
  ModelSpec spec;
  spec.n_models = dataset.models.size();
  spec.n_groups = dataset.group_counts();
  return spec;
}

void ModelSpec::validate() const {
  if (n_models < 1) {
    throw Error(ErrorCode::kInvalidArgument, "model spec needs >= 1 model");
  }
  for (int count : n_groups) {
    if (count < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative group count");
    }
  }
  if (!(alpha > 0.0) || !(tau_prior_rate > 0.0) || !(theta_prior_sd > 0.0) ||
      !(log_nu_prior_sd > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "alpha, tau rate and prior scales must be positive");
  }
}

int ModelSpec::u_offset(Axis axis) const {
  int offset = n_models - 1;
  for (int slot = 0; slot < axis_slot(axis); ++slot) {
    offset += n_models * n_groups[slot];
  }
  return offset;
}

int ModelSpec::log_tau_offset() const {
  return u_offset(Axis::kPolitics) +
         n_models * n_groups[axis_slot(Axis::kPolitics)];
}

int ModelSpec::dimension() const { return log_tau_offset() + kNumAxes + 1; }

ParameterState ParameterState::zeros(const ModelSpec& spec) {
  ParameterState state;
  state.theta_free = Eigen::VectorXd::Zero(spec.n_models - 1);
  for (int slot = 0; slot < kNumAxes; ++slot) {
    state.u_raw[slot] = Eigen::MatrixXd::Zero(spec.n_models, spec.n_groups[slot]);
  }
  return state;
}

ParameterState ParameterState::from_flat(const ModelSpec& spec,
                                         const Eigen::VectorXd& flat) {
  if (flat.size() != spec.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "flat vector of size " + std::to_string(flat.size()) +
                    ", expected " + std::to_string(spec.dimension()));
  }
  ParameterState state;
  state.theta_free = flat.head(spec.n_models - 1);
  for (Axis axis : kAllAxes) {
    const int groups = spec.n_groups[axis_slot(axis)];
    state.u_raw[axis_slot(axis)] = Eigen::Map<const RowMajorMatrix>(
        flat.data() + spec.u_offset(axis), spec.n_models, groups);
  }
  state.log_tau = flat.segment<3>(spec.log_tau_offset());
  state.log_nu = flat[spec.log_nu_offset()];
  return state;
}

Eigen::VectorXd ParameterState::to_flat() const {
  Eigen::Index size = theta_free.size() + kNumAxes + 1;
  for (const auto& u : u_raw) size += u.size();
  Eigen::VectorXd flat(size);
  Eigen::Index offset = 0;
  flat.segment(offset, theta_free.size()) = theta_free;
  offset += theta_free.size();
  for (const auto& u : u_raw) {
    Eigen::Map<RowMajorMatrix>(flat.data() + offset, u.rows(), u.cols()) = u;
    offset += u.size();
  }
  flat.segment<3>(offset) = log_tau;
  flat[offset + 3] = log_nu;
  return flat;
}

void ParameterState::check_shape(const ModelSpec& spec) const {
  bool ok = theta_free.size() == spec.n_models - 1;
  for (int slot = 0; slot < kNumAxes; ++slot) {
    ok = ok && u_raw[slot].rows() == spec.n_models &&
         u_raw[slot].cols() == spec.n_groups[slot];
  }
  if (!ok) {
    throw Error(ErrorCode::kDimensionMismatch,
                "parameter state does not match the model spec");
  }
}

Eigen::MatrixXd sum_to_zero_basis(int n_models) {
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n_models, n_models - 1);
  for (int k = 0; k + 1 < n_models; ++k) {
    const double k1 = k + 1.0;
    const double norm = std::sqrt(k1 * (k1 + 1.0));
    for (int i = 0; i <= k; ++i) basis(i, k) = 1.0 / norm;
    basis(k + 1, k) = -k1 / norm;
  }
  return basis;
}

Eigen::VectorXd expand_theta(const Eigen::VectorXd& theta_free) {
  const int n = static_cast<int>(theta_free.size()) + 1;
  Eigen::VectorXd theta(n);
  helmert_apply(theta_free.data(), n, theta.data());
  return theta;
}

Eigen::VectorXd contract_theta(const Eigen::VectorXd& theta) {
  const int n = static_cast<int>(theta.size());
  Eigen::VectorXd free(std::max(n - 1, 0));
  helmert_apply_transpose(theta.data(), n, free.data());
  return free;
}

OutcomeProbs outcome_probs(double eta, double nu) {
  if (!(nu > 0.0)) {
    throw Error(ErrorCode::kNonPositiveNu,
                "tie propensity must be positive, got " + std::to_string(nu));
  }
  return outcome_probs_log_nu(eta, std::log(nu));
}

OutcomeProbs outcome_probs_log_nu(double eta, double log_nu) {
  OutcomeProbs probs;
  log_sum_probs(eta, log_nu, &probs.p_a, &probs.p_t, &probs.p_b);
  return probs;
}

Eigen::MatrixXd centered_adjustments(const Eigen::MatrixXd& u_raw, double tau) {
  if (u_raw.cols() == 0) return u_raw;
  Eigen::MatrixXd scaled = u_raw * tau;
  scaled.colwise() -= scaled.rowwise().mean();
  scaled.colwise() -= scaled.rowwise().mean();
  return scaled;
}

Eigen::MatrixXd centered_adjustments(const ParameterState& state, Axis axis) {
  return centered_adjustments(state.u_raw[axis_slot(axis)], state.tau(axis));
}

RaterWeights RaterWeights::of(const RaterProfile& rater,
                              const Dataset& dataset) {
  RaterWeights weights;
  for (Axis axis : kAllAxes) {
    weights.axes[axis_slot(axis)] =
        sparse_membership_weights(rater, axis, dataset.group_index(axis));
  }
  return weights;
}

double latent_advantage(const ParameterState& state, int model_a, int model_b,
                        const RaterWeights& weights, const ModelSpec& spec) {
  state.check_shape(spec);
  if (model_a < 0 || model_b < 0 || model_a >= spec.n_models ||
      model_b >= spec.n_models) {
    throw Error(ErrorCode::kIndexOutOfRange, "model index out of range");
  }
  const Eigen::VectorXd theta = expand_theta(state.theta_free);
  double demographic = 0.0;
  for (Axis axis : kAllAxes) {
    const auto& axis_weights = weights.axes[axis_slot(axis)];
    if (axis_weights.empty()) continue;
    const Eigen::MatrixXd adjust = centered_adjustments(state, axis);
    for (const auto& [group, weight] : axis_weights) {
      if (group < 0 || group >= adjust.cols()) {
        throw Error(ErrorCode::kIndexOutOfRange, "group index out of range");
      }
      demographic += weight * (adjust(model_a, group) - adjust(model_b, group));
    }
  }
  return theta[model_a] - theta[model_b] + spec.alpha * demographic;
}

double latent_advantage(const ParameterState& state,
                        const ComparisonRecord& record, const Dataset& dataset,
                        const ModelSpec& spec) {
  return latent_advantage(state, dataset.models.at(record.model_a),
                          dataset.models.at(record.model_b),
                          RaterWeights::of(record.rater, dataset), spec);
}

MetricData MetricData::compile(const Dataset& dataset,
                               std::string_view metric) {
  MetricData data(dataset.models.size(), dataset.group_counts());
  for (const auto& record : dataset.records) {
    if (record.metric != metric) continue;
    data.add(dataset.models.at(record.model_a),
             dataset.models.at(record.model_b),
             RaterWeights::of(record.rater, dataset), record.outcome);
  }
  return data;
}

void MetricData::add(int model_a, int model_b, const RaterWeights& weights,
                     Outcome outcome, double count) {
  if (model_a < 0 || model_b < 0 || model_a >= n_models_ ||
      model_b >= n_models_ || model_a == model_b) {
    throw Error(ErrorCode::kIndexOutOfRange, "invalid model pair");
  }
  for (int slot = 0; slot < kNumAxes; ++slot) {
    for (const auto& [group, weight] : weights.axes[slot]) {
      if (group < 0 || group >= n_groups_[slot]) {
        throw Error(ErrorCode::kIndexOutOfRange, "group index out of range");
      }
    }
  }
  auto key = std::make_pair(std::make_pair(model_a, model_b), weights);
  auto [it, inserted] = lookup_.emplace(std::move(key), patterns_.size());
  if (inserted) {
    patterns_.push_back(ComparisonPattern{model_a, model_b, weights, {}});
  }
  patterns_[it->second].counts[static_cast<int>(outcome)] += count;
  n_records_ += count;
}

double log_prior(const ParameterState& state, const ModelSpec& spec) {
  state.check_shape(spec);
  double total = 0.0;
  const double theta_sd = spec.theta_prior_sd;
  for (double x : state.theta_free) {
    total += -0.5 * (x / theta_sd) * (x / theta_sd) - std::log(theta_sd) -
             kHalfLogTwoPi;
  }
  for (const auto& u : state.u_raw) {
    total += -0.5 * u.squaredNorm() - kHalfLogTwoPi * static_cast<double>(u.size());
  }
  const double rate = spec.tau_prior_rate;
  for (double log_tau : state.log_tau) {
    total += std::log(rate) - rate * std::exp(log_tau) + log_tau;
  }
  const double nu_sd = spec.log_nu_prior_sd;
  total += -0.5 * (state.log_nu / nu_sd) * (state.log_nu / nu_sd) -
           std::log(nu_sd) - kHalfLogTwoPi;
  return total;
}

double log_posterior_flat(const ModelSpec& spec, const MetricData& data,
                          const Eigen::VectorXd& flat,
                          Eigen::VectorXd* gradient) {
  check_data_shape(spec, data);
  if (flat.size() != spec.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "flat state has wrong size");
  }
  const int n = spec.n_models;
  const double alpha = spec.alpha;

  Eigen::VectorXd theta(n);
  helmert_apply(flat.data(), n, theta.data());

  std::array<RowMajorMatrix, kNumAxes> adjust;
  std::array<double, kNumAxes> tau{};
  for (Axis axis : kAllAxes) {
    const int slot = axis_slot(axis);
    tau[slot] = std::exp(flat[spec.log_tau_offset() + slot]);
    Eigen::Map<const RowMajorMatrix> raw(flat.data() + spec.u_offset(axis), n,
                                         spec.n_groups[slot]);
    if (spec.n_groups[slot] > 0) {
      adjust[slot] = (raw.colwise() - raw.rowwise().mean()) * tau[slot];
    } else {
      adjust[slot].resize(n, 0);
    }
  }
  const double log_nu = flat[spec.log_nu_offset()];

  Eigen::VectorXd grad_theta;
  std::array<RowMajorMatrix, kNumAxes> grad_adjust;
  double grad_log_nu = 0.0;
  if (gradient != nullptr) {
    grad_theta = Eigen::VectorXd::Zero(n);
    for (int slot = 0; slot < kNumAxes; ++slot) {
      grad_adjust[slot] = RowMajorMatrix::Zero(n, spec.n_groups[slot]);
    }
  }

  double log_lik = 0.0;
  for (const auto& pattern : data.patterns()) {
    const int a = pattern.model_a;
    const int b = pattern.model_b;
    double demographic = 0.0;
    for (int slot = 0; slot < kNumAxes; ++slot) {
      for (const auto& [group, weight] : pattern.weights.axes[slot]) {
        demographic += weight * (adjust[slot](a, group) - adjust[slot](b, group));
      }
    }
    const double eta = theta[a] - theta[b] + alpha * demographic;
    double p_a, p_t, p_b;
    const double log_z = log_sum_probs(eta, log_nu, &p_a, &p_t, &p_b);
    const auto& counts = pattern.counts;
    if (counts[0] > 0) log_lik += counts[0] * (eta - log_z);
    if (counts[1] > 0) log_lik += counts[1] * (log_nu - log_z);
    if (counts[2] > 0) log_lik += counts[2] * (-eta - log_z);

    if (gradient != nullptr) {
      const double total = counts[0] + counts[1] + counts[2];
      const double d_eta = counts[0] - counts[2] - total * (p_a - p_b);
      grad_log_nu += counts[1] - total * p_t;
      grad_theta[a] += d_eta;
      grad_theta[b] -= d_eta;
      const double d_demo = alpha * d_eta;
      for (int slot = 0; slot < kNumAxes; ++slot) {
        for (const auto& [group, weight] : pattern.weights.axes[slot]) {
          grad_adjust[slot](a, group) += d_demo * weight;
          grad_adjust[slot](b, group) -= d_demo * weight;
        }
      }
    }
  }

  // Priors, evaluated on the flat vector directly.
  double log_pri = 0.0;
  const double theta_sd = spec.theta_prior_sd;
  for (int k = 0; k + 1 < n; ++k) {
    const double z = flat[k] / theta_sd;
    log_pri += -0.5 * z * z - std::log(theta_sd) - kHalfLogTwoPi;
  }
  for (Axis axis : kAllAxes) {
    const int count = n * spec.n_groups[axis_slot(axis)];
    const auto raw = flat.segment(spec.u_offset(axis), count);
    log_pri += -0.5 * raw.squaredNorm() - kHalfLogTwoPi * count;
  }
  const double rate = spec.tau_prior_rate;
  for (int slot = 0; slot < kNumAxes; ++slot) {
    log_pri += std::log(rate) - rate * tau[slot] +
               flat[spec.log_tau_offset() + slot];
  }
  const double nu_sd = spec.log_nu_prior_sd;
  log_pri += -0.5 * (log_nu / nu_sd) * (log_nu / nu_sd) - std::log(nu_sd) -
             kHalfLogTwoPi;

  if (gradient != nullptr) {
    gradient->resize(spec.dimension());
    Eigen::VectorXd& g = *gradient;
    helmert_apply_transpose(grad_theta.data(), n, g.data());
    for (int k = 0; k + 1 < n; ++k) g[k] -= flat[k] / (theta_sd * theta_sd);
    for (Axis axis : kAllAxes) {
      const int slot = axis_slot(axis);
      const int groups = spec.n_groups[slot];
      const int offset = spec.u_offset(axis);
      double d_log_tau = 0.0;
      if (groups > 0) {
        d_log_tau = grad_adjust[slot].cwiseProduct(adjust[slot]).sum();
        RowMajorMatrix d_raw =
            (grad_adjust[slot].colwise() - grad_adjust[slot].rowwise().mean()) *
            tau[slot];
        Eigen::Map<RowMajorMatrix>(g.data() + offset, n, groups) =
            d_raw - Eigen::Map<const RowMajorMatrix>(flat.data() + offset, n,
                                                     groups);
      }
      g[spec.log_tau_offset() + slot] = d_log_tau - rate * tau[slot] + 1.0;
    }
    g[spec.log_nu_offset()] = grad_log_nu - log_nu / (nu_sd * nu_sd);
  }
  return log_lik + log_pri;
}

double log_posterior(const ParameterState& state, const MetricData& data,
                     const ModelSpec& spec) {
  state.check_shape(spec);
  return log_posterior_flat(spec, data, state.to_flat(), nullptr);
}

ParameterState grad_log_posterior(const ParameterState& state,
                                  const MetricData& data,
                                  const ModelSpec& spec) {
  state.check_shape(spec);
  Eigen::VectorXd gradient;
  log_posterior_flat(spec, data, state.to_flat(), &gradient);
  return ParameterState::from_flat(spec, gradient);
}

}  // namespace arena
