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

#include "pref_arena/matchmaker.hpp"

#include <algorithm>
#include <cmath>

#include "pref_arena/error.hpp"
#include "pref_arena/stats.hpp"

namespace arena {
namespace {

constexpr double kLogInvSqrtTwoPi = -0.91893853320467274178;

double log_normal_pdf(double x) { return kLogInvSqrtTwoPi - 0.5 * x * x; }

std::pair<Rating, Rating> apply_factors(const Rating& a, const Rating& b,
                                        double var_a, double var_b, double c,
                                        double v, double w) {
  w = std::clamp(w, 0.0, 1.0);
  Rating next_a{a.mu + var_a / c * v,
                std::sqrt(var_a * (1.0 - var_a / (c * c) * w))};
  Rating next_b{b.mu - var_b / c * v,
                std::sqrt(var_b * (1.0 - var_b / (c * c) * w))};
  // Dynamics noise never lets an update widen a rating.
  next_a.sigma = std::min(next_a.sigma, a.sigma);
  next_b.sigma = std::min(next_b.sigma, b.sigma);
  return {next_a, next_b};
}

}  // namespace

MatchConfig MatchConfig::with_prior(double mu0, double sigma0) {
  MatchConfig config;
  config.mu0 = mu0;
  config.sigma0 = sigma0;
  config.perf_beta = sigma0 / 2.0;
  config.dyn_tau = sigma0 / 100.0;
  return config;
}

void MatchConfig::validate() const {
  if (!(sigma0 > 0.0) || !(perf_beta > 0.0) || !(dyn_tau >= 0.0) ||
      !std::isfinite(mu0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sigma0 and perf_beta must be positive, dyn_tau non-negative");
  }
  if (!(p_draw > 0.0 && p_draw < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "p_draw must be in (0,1)");
  }
  if (!(exploration_eps >= 0.0 && exploration_eps <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "exploration_eps must be in [0,1]");
  }
}

double MatchConfig::draw_margin() const {
  return stats::normal_quantile((p_draw + 1.0) / 2.0) * std::sqrt(2.0) *
         perf_beta;
}

double trueskill_v_win(double t, double margin) {
  const double x = t - margin;
  return std::exp(log_normal_pdf(x) - stats::log_normal_cdf(x));
}

double trueskill_w_win(double t, double margin) {
  const double x = t - margin;
  const double v = trueskill_v_win(t, margin);
  return std::clamp(v * (v + x), 0.0, 1.0);
}

namespace {

// Shared pieces of the draw factors for t >= 0.
struct DrawTerms {
  double a = 0.0;       // margin - t
  double b = 0.0;       // -margin - t
  double pdf_a = 0.0;   // phi(a) / D
  double pdf_b = 0.0;   // phi(b) / D
};

DrawTerms draw_terms(double t_abs, double margin) {
  DrawTerms terms;
  terms.a = margin - t_abs;
  terms.b = -margin - t_abs;
  const double log_cdf_a = stats::log_normal_cdf(terms.a);
  const double log_cdf_b = stats::log_normal_cdf(terms.b);
  const double log_d = log_cdf_a + std::log1p(-std::exp(log_cdf_b - log_cdf_a));
  terms.pdf_a = std::exp(log_normal_pdf(terms.a) - log_d);
  terms.pdf_b = std::exp(log_normal_pdf(terms.b) - log_d);
  return terms;
}

}  // namespace

double trueskill_v_draw(double t, double margin) {
  const DrawTerms terms = draw_terms(std::abs(t), margin);
  const double v = terms.pdf_b - terms.pdf_a;
  return t >= 0.0 ? v : -v;
}

double trueskill_w_draw(double t, double margin) {
  const DrawTerms terms = draw_terms(std::abs(t), margin);
  const double v = terms.pdf_b - terms.pdf_a;
  return std::clamp(v * v + terms.a * terms.pdf_a - terms.b * terms.pdf_b, 0.0,
                    1.0);
}

std::pair<Rating, Rating> update_ratings(const Rating& a, const Rating& b,
                                         Outcome outcome,
                                         const MatchConfig& config) {
  if (!(a.sigma > 0.0) || !(b.sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "rating sigma must be positive");
  }
  const double tau2 = config.dyn_tau * config.dyn_tau;
  const double var_a = a.sigma * a.sigma + tau2;
  const double var_b = b.sigma * b.sigma + tau2;
  const double c = std::sqrt(2.0 * config.perf_beta * config.perf_beta + var_a +
                             var_b);
  const double margin = config.draw_margin() / c;
  switch (outcome) {
    case Outcome::kWinA: {
      const double t = (a.mu - b.mu) / c;
      return apply_factors(a, b, var_a, var_b, c, trueskill_v_win(t, margin),
                           trueskill_w_win(t, margin));
    }
    case Outcome::kWinB: {
      const double t = (b.mu - a.mu) / c;
      auto [next_b, next_a] =
          apply_factors(b, a, var_b, var_a, c, trueskill_v_win(t, margin),
                        trueskill_w_win(t, margin));
      return {next_a, next_b};
    }
    case Outcome::kTie: {
      const double t = (a.mu - b.mu) / c;
      return apply_factors(a, b, var_a, var_b, c, trueskill_v_draw(t, margin),
                           trueskill_w_draw(t, margin));
    }
  }
  return {a, b};
}

double match_quality(const Rating& a, const Rating& b,
                     const MatchConfig& config) {
  const double beta2 = config.perf_beta * config.perf_beta;
  const double c2 = 2.0 * beta2 + a.sigma * a.sigma + b.sigma * b.sigma;
  const double diff = a.mu - b.mu;
  return std::sqrt(2.0 * beta2 / c2) * std::exp(-diff * diff / (2.0 * c2));
}

TournamentState TournamentState::initial(std::string stratum,
                                         std::span<const ModelRef> models,
                                         const MatchConfig& config) {
  TournamentState state;
  state.stratum = std::move(stratum);
  for (const auto& model : models) {
    state.ratings[model] = Rating{config.mu0, config.sigma0};
    state.play_counts[model] = 0;
  }
  return state;
}

bool TournamentState::apply(const ResultEvent& event, const MatchConfig& config) {
  if (applied_event_ids.count(event.event_id) > 0) return false;
  if (event.seq <= log_cursor) {
    throw Error(ErrorCode::kOutOfOrderEvent,
                "event seq " + std::to_string(event.seq) +
                    " does not follow cursor " + std::to_string(log_cursor));
  }
  auto it_a = ratings.find(event.model_a);
  auto it_b = ratings.find(event.model_b);
  if (it_a == ratings.end() || it_b == ratings.end()) {
    throw Error(ErrorCode::kUnknownModel,
                "event " + event.event_id + " names an unregistered model");
  }
  if (event.model_a == event.model_b) {
    throw Error(ErrorCode::kSelfComparison, "event " + event.event_id);
  }
  auto [next_a, next_b] =
      update_ratings(it_a->second, it_b->second, event.outcome, config);
  it_a->second = next_a;
  it_b->second = next_b;
  ++play_counts[event.model_a];
  ++play_counts[event.model_b];
  log_cursor = event.seq;
  applied_event_ids.insert(event.event_id);
  return true;
}

std::pair<ModelRef, ModelRef> select_pair(const TournamentState& state,
                                          const MatchConfig& config,
                                          std::mt19937_64& rng) {
  if (state.ratings.size() < 2) {
    throw Error(ErrorCode::kTooFewModels,
                "stratum " + state.stratum + " has fewer than 2 models");
  }
  std::vector<const ModelRef*> models;
  for (const auto& [model, rating] : state.ratings) models.push_back(&model);
  const int n = static_cast<int>(models.size());

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int best_i = 0;
  int best_j = 1;
  if (unit(rng) < config.exploration_eps) {
    std::uniform_int_distribution<int> pick(0, n * (n - 1) / 2 - 1);
    int index = pick(rng);
    for (int i = 0; i < n; ++i) {
      if (index < n - 1 - i) {
        best_i = i;
        best_j = i + 1 + index;
        break;
      }
      index -= n - 1 - i;
    }
  } else {
    double best_quality = -1.0;
    int best_plays = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double quality = match_quality(state.ratings.at(*models[i]),
                                             state.ratings.at(*models[j]), config);
        const int plays =
            state.play_counts.at(*models[i]) + state.play_counts.at(*models[j]);
        if (quality > best_quality ||
            (quality == best_quality && plays < best_plays)) {
          best_quality = quality;
          best_plays = plays;
          best_i = i;
          best_j = j;
        }
      }
    }
  }
  if (std::bernoulli_distribution(0.5)(rng)) std::swap(best_i, best_j);
  return {*models[best_i], *models[best_j]};
}

TournamentState replay_log(const std::string& stratum,
                           std::span<const ModelRef> models,
                           std::span<const ResultEvent> events,
                           const MatchConfig& config) {
  TournamentState state = TournamentState::initial(stratum, models, config);
  for (const auto& event : events) {
    if (event.stratum != stratum) continue;
    state.apply(event, config);
  }
  return state;
}

}  // namespace arena
