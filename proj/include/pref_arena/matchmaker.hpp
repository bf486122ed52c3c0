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

// Two-player TrueSkill with draws, used to choose which pair of models a
// rater sees next. Every stratum runs its own tournament; its state is a
// fold of update_ratings over that stratum's result events.

#ifndef PREF_ARENA_MATCHMAKER_HPP_
#define PREF_ARENA_MATCHMAKER_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pref_arena/core.hpp"

namespace arena {

struct Rating {
  double mu = 25.0;
  double sigma = 25.0 / 3.0;
  bool operator==(const Rating&) const = default;
};

struct MatchConfig {
  double mu0 = 25.0;
  double sigma0 = 25.0 / 3.0;
  double perf_beta = 25.0 / 6.0;
  double dyn_tau = 25.0 / 300.0;
  double p_draw = 0.10;
  double exploration_eps = 0.10;

  // Conventional defaults derived from mu0 and sigma0.
  static MatchConfig with_prior(double mu0, double sigma0);
  void validate() const;
  // Absolute draw margin: Phi^-1((p_draw + 1) / 2) * sqrt(2) * perf_beta.
  double draw_margin() const;
};

std::pair<Rating, Rating> update_ratings(const Rating& a, const Rating& b,
                                         Outcome outcome,
                                         const MatchConfig& config);

// Draw probability of the match relative to an evenly matched, perfectly
// known pair; in (0, 1].
double match_quality(const Rating& a, const Rating& b, const MatchConfig& config);

struct ResultEvent {
  std::int64_t seq = 0;
  std::string event_id;
  std::string stratum;
  ModelRef model_a;
  ModelRef model_b;
  Outcome outcome = Outcome::kTie;
  std::string timestamp;
  bool operator==(const ResultEvent&) const = default;
};

struct TournamentState {
  std::string stratum;
  std::map<ModelRef, Rating> ratings;
  std::map<ModelRef, int> play_counts;
  std::int64_t log_cursor = 0;
  std::set<std::string> applied_event_ids;

  static TournamentState initial(std::string stratum,
                                 std::span<const ModelRef> models,
                                 const MatchConfig& config);
  // Applies one event. Returns false (and changes nothing) for an event id
  // that was already applied; throws kOutOfOrderEvent if seq does not
  // advance the cursor.
  bool apply(const ResultEvent& event, const MatchConfig& config);

  bool operator==(const TournamentState&) const = default;
};

// Most uncertain pair (maximal match quality), or a uniformly random pair
// with probability exploration_eps. Presentation order is randomised.
std::pair<ModelRef, ModelRef> select_pair(const TournamentState& state,
                                          const MatchConfig& config,
                                          std::mt19937_64& rng);

TournamentState replay_log(const std::string& stratum,
                           std::span<const ModelRef> models,
                           std::span<const ResultEvent> events,
                           const MatchConfig& config);

// Truncated-Gaussian correction factors, exposed for testing. `t` and
// `margin` are in units of the combined standard deviation c.
double trueskill_v_win(double t, double margin);
double trueskill_w_win(double t, double margin);
double trueskill_v_draw(double t, double margin);
double trueskill_w_draw(double t, double margin);

}  // namespace arena

#endif  // PREF_ARENA_MATCHMAKER_HPP_
