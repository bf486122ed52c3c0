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

#include <algorithm>
#include <cmath>
#include <vector>

#include "pref_arena/error.hpp"
#include "pref_arena/sampler.hpp"
#include "pref_arena/stats.hpp"

namespace arena {
namespace {

// Splits every chain into its first and second half (dropping the middle
// draw of odd-length chains).
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& chains) {
  const Eigen::Index half = chains.rows() / 2;
  const Eigen::Index offset = chains.rows() - half;
  Eigen::MatrixXd split(half, 2 * chains.cols());
  for (Eigen::Index m = 0; m < chains.cols(); ++m) {
    split.col(2 * m) = chains.col(m).head(half);
    split.col(2 * m + 1) = chains.col(m).segment(offset, half);
  }
  return split;
}

Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& values) {
  std::vector<double> pooled(values.data(), values.data() + values.size());
  const std::vector<double> ranks = stats::average_ranks(pooled);
  const double total = static_cast<double>(pooled.size());
  Eigen::MatrixXd z(values.rows(), values.cols());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    z.data()[k] = stats::normal_quantile((ranks[k] - 0.375) / (total + 0.25));
  }
  return z;
}

double rhat_of(const Eigen::MatrixXd& chains) {
  const double n = static_cast<double>(chains.rows());
  const Eigen::VectorXd means = chains.colwise().mean().transpose();
  double within = 0.0;
  for (Eigen::Index m = 0; m < chains.cols(); ++m) {
    within += (chains.col(m).array() - means[m]).square().sum() / (n - 1.0);
  }
  within /= static_cast<double>(chains.cols());
  const double between =
      n * (means.array() - means.mean()).square().sum() /
      static_cast<double>(chains.cols() - 1);
  if (!(within > 0.0)) return between > 0.0 ? kRhatSentinel : 1.0;
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

double ess_of(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows();
  const Eigen::Index m_chains = chains.cols();
  const double total = static_cast<double>(n * m_chains);
  const Eigen::VectorXd means = chains.colwise().mean().transpose();
  Eigen::MatrixXd centered = chains.rowwise() - means.transpose();

  auto mean_autocov = [&](Eigen::Index lag) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < m_chains; ++m) {
      sum += centered.col(m).head(n - lag).dot(centered.col(m).tail(n - lag));
    }
    return sum / static_cast<double>(n) / static_cast<double>(m_chains);
  };

  const double acov0 = mean_autocov(0);
  const double within = acov0 * static_cast<double>(n) / (n - 1.0);
  double var_plus = within * (n - 1.0) / static_cast<double>(n);
  if (m_chains > 1) {
    var_plus += (means.array() - means.mean()).square().sum() /
                static_cast<double>(m_chains - 1);
  }
  if (!(var_plus > 0.0)) return total;

  auto rho = [&](Eigen::Index lag) {
    return 1.0 - (within - mean_autocov(lag)) / var_plus;
  };

  double previous = rho(0) + rho(1);
  double sum = previous;
  for (Eigen::Index k = 1; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, previous);
    sum += pair;
    previous = pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(total));
  return std::min(total / tau, total * std::log10(total));
}

}  // namespace

double split_rhat(const Eigen::MatrixXd& chains) {
  const Eigen::MatrixXd split = split_chains(chains);
  const double bulk = rhat_of(rank_normalize(split));
  std::vector<double> pooled(split.data(), split.data() + split.size());
  const double median = stats::quantile(pooled, 0.5);
  const double tail =
      rhat_of(rank_normalize((split.array() - median).abs().matrix()));
  return std::max(bulk, tail);
}

double effective_sample_size(const Eigen::MatrixXd& chains) {
  return ess_of(rank_normalize(split_chains(chains)));
}

double Diagnostics::max_rhat() const {
  return rhat.empty() ? 1.0 : *std::max_element(rhat.begin(), rhat.end());
}

double Diagnostics::min_ess() const {
  return ess.empty() ? 0.0 : *std::min_element(ess.begin(), ess.end());
}

Diagnostics compute_diagnostics(const PosteriorDraws& draws) {
  if (draws.n_chains < 2 || draws.n_draws_per_chain < 10) {
    throw Error(ErrorCode::kInsufficientDraws,
                "diagnostics need >= 2 chains of >= 10 draws");
  }
  const int n = draws.n_draws_per_chain;
  const int m = draws.n_chains;
  if (static_cast<int>(draws.draws.size()) != n * m) {
    throw Error(ErrorCode::kInsufficientDraws, "draw count does not match chains");
  }
  std::vector<Eigen::VectorXd> flat;
  flat.reserve(draws.draws.size());
  for (const auto& snapshot : draws.draws) flat.push_back(snapshot.flatten());

  Diagnostics out;
  out.names = draws.scalar_names();
  out.acceptance_rate = draws.acceptance_rate;
  out.divergence_count = draws.divergence_count;
  const Eigen::Index scalars = flat.front().size();
  Eigen::MatrixXd chains(n, m);
  for (Eigen::Index s = 0; s < scalars; ++s) {
    for (int c = 0; c < m; ++c) {
      for (int i = 0; i < n; ++i) chains(i, c) = flat[c * n + i][s];
    }
    out.rhat.push_back(split_rhat(chains));
    out.ess.push_back(effective_sample_size(chains));
  }
  return out;
}

}  // namespace arena
