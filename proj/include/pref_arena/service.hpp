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

// Tournament service: hands out pair tickets from per-stratum TrueSkill
// tournaments, records results in an append-only per-stratum event log, and
// rebuilds its state from that log on start-up. An HTTP/JSON front end
// exposes it to data-collection clients.

#ifndef PREF_ARENA_SERVICE_HPP_
#define PREF_ARENA_SERVICE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "pref_arena/matchmaker.hpp"

namespace arena {

struct PairTicket {
  std::string ticket_id;
  std::string stratum;
  ModelRef model_a;
  ModelRef model_b;
  std::string issued_at;
};

struct SubmitAck {
  std::int64_t seq = 0;
  bool duplicate = false;  // resubmitted idempotency key
};

struct StandingRow {
  ModelRef model;
  double mu = 0.0;
  double sigma = 0.0;
  double conservative = 0.0;  // mu - 3 sigma
  int plays = 0;
};

struct ServiceConfig {
  std::filesystem::path log_dir;
  MatchConfig match;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<ModelRef>> strata;
  bool fsync = true;
};

// Sorted by conservative estimate, descending; ties by model id.
std::vector<StandingRow> standings_of(const TournamentState& state);

// File name of a stratum's event log (percent-encoded stratum + ".jsonl").
std::string log_file_name(const std::string& stratum);

// Parses a stratum log. A torn final line is ignored; any other malformed
// line throws kParseError.
std::vector<ResultEvent> read_event_log(const std::filesystem::path& path);

class TournamentService {
 public:
  // Replays any existing logs under config.log_dir.
  explicit TournamentService(ServiceConfig config);
  ~TournamentService();
  TournamentService(const TournamentService&) = delete;
  TournamentService& operator=(const TournamentService&) = delete;

  // Throws kUnknownStratum, kTooFewModels. Does not touch ratings.
  PairTicket next_pair(const std::string& stratum);
  // Throws kUnknownStratum, kUnknownTicket, kInvalidOutcome. The event is
  // on disk before this returns.
  SubmitAck submit_result(const std::string& stratum, const std::string& ticket_id,
                          const std::string& outcome,
                          const std::string& idempotency_key);
  std::vector<StandingRow> standings(const std::string& stratum) const;
  TournamentState snapshot(const std::string& stratum) const;
  std::vector<std::string> strata() const;

 private:
  struct Stratum;
  Stratum& find(const std::string& stratum) const;

  ServiceConfig config_;
  std::map<std::string, std::unique_ptr<Stratum>> strata_;
  std::string instance_;
  std::mutex ticket_mutex_;
  std::uint64_t ticket_counter_ = 0;
  std::map<std::string, PairTicket> tickets_;
};

// HTTP front end:
//   GET  /tournaments/{stratum}/next-pair
//   POST /tournaments/{stratum}/results  {ticket_id, outcome, idempotency_key}
//   GET  /tournaments/{stratum}/standings
// Errors are {code, message} with 404/409/422/400 statuses.
class HttpFrontEnd {
 public:
  explicit HttpFrontEnd(TournamentService& service);
  ~HttpFrontEnd();
  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from elsewhere.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace arena

#endif  // PREF_ARENA_SERVICE_HPP_
