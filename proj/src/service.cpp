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

#include "pref_arena/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pref_arena/error.hpp"
#include "pref_arena/sampler.hpp"

namespace arena {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  const auto millis = std::chrono::duration_cast<std::chrono::milliseconds>(
                          now.time_since_epoch()).count() % 1000;
  std::tm parts{};
  gmtime_r(&seconds, &parts);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%S", &parts);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buffer, static_cast<int>(millis));
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string event_line(const ResultEvent& event) {
  ordered_json doc;
  doc["seq"] = event.seq;
  doc["event_id"] = event.event_id;
  doc["stratum"] = event.stratum;
  doc["model_a"] = event.model_a;
  doc["model_b"] = event.model_b;
  doc["outcome"] = std::string(outcome_token(event.outcome));
  doc["timestamp"] = event.timestamp;
  return doc.dump() + "\n";
}

ResultEvent parse_event(const std::string& line) {
  const json doc = json::parse(line);
  ResultEvent event;
  event.seq = doc.at("seq").get<std::int64_t>();
  event.event_id = doc.at("event_id").get<std::string>();
  event.stratum = doc.at("stratum").get<std::string>();
  event.model_a = doc.at("model_a").get<std::string>();
  event.model_b = doc.at("model_b").get<std::string>();
  auto outcome = parse_outcome(doc.at("outcome").get<std::string>());
  if (!outcome) throw Error(ErrorCode::kParseError, "bad outcome in event log");
  event.outcome = *outcome;
  event.timestamp = doc.value("timestamp", "");
  return event;
}

void write_all(int fd, const std::string& data, bool sync) {
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIoError, std::string("event log write: ") +
                                           std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync && ::fsync(fd) != 0) {
    throw Error(ErrorCode::kIoError, std::string("event log fsync: ") +
                                         std::strerror(errno));
  }
}

}  // namespace

std::vector<StandingRow> standings_of(const TournamentState& state) {
  std::vector<StandingRow> rows;
  for (const auto& [model, rating] : state.ratings) {
    StandingRow row;
    row.model = model;
    row.mu = rating.mu;
    row.sigma = rating.sigma;
    row.conservative = rating.mu - 3.0 * rating.sigma;
    auto plays = state.play_counts.find(model);
    row.plays = plays == state.play_counts.end() ? 0 : plays->second;
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const StandingRow& a, const StandingRow& b) {
                     if (a.conservative != b.conservative) {
                       return a.conservative > b.conservative;
                     }
                     return a.model < b.model;
                   });
  return rows;
}

std::string log_file_name(const std::string& stratum) {
  static const char* kHex = "0123456789ABCDEF";
  std::string name;
  for (unsigned char c : stratum) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
      name += static_cast<char>(c);
    } else {
      name += '%';
      name += kHex[c >> 4];
      name += kHex[c & 15];
    }
  }
  return name + ".jsonl";
}

std::vector<ResultEvent> read_event_log(const std::filesystem::path& path) {
  std::vector<ResultEvent> events;
  std::ifstream in(path);
  if (!in) return events;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      events.push_back(parse_event(lines[i]));
    } catch (const std::exception& e) {
      if (i + 1 == lines.size()) {
        spdlog::warn("ignoring torn final line of {}", path.string());
        break;
      }
      throw Error(ErrorCode::kParseError, path.string() + " line " +
                                              std::to_string(i + 1) + ": " + e.what());
    }
  }
  return events;
}

struct TournamentService::Stratum {
  std::string name;
  std::vector<ModelRef> models;
  std::mutex write_mutex;
  mutable std::mutex snapshot_mutex;
  std::shared_ptr<const TournamentState> state;
  std::map<std::string, std::int64_t> seq_by_key;
  std::mutex rng_mutex;
  std::mt19937_64 rng;
  int fd = -1;

  std::shared_ptr<const TournamentState> load() const {
    std::lock_guard<std::mutex> lock(snapshot_mutex);
    return state;
  }
  void store(std::shared_ptr<const TournamentState> next) {
    std::lock_guard<std::mutex> lock(snapshot_mutex);
    state = std::move(next);
  }
};

TournamentService::TournamentService(ServiceConfig config)
    : config_(std::move(config)) {
  config_.match.validate();
  std::filesystem::create_directories(config_.log_dir);
  std::random_device device;
  instance_ = std::to_string(splitmix64((static_cast<std::uint64_t>(device()) << 32) ^
                                        device()) % 1000000007ULL);
  for (const auto& [name, models] : config_.strata) {
    auto stratum = std::make_unique<Stratum>();
    stratum->name = name;
    stratum->models = models;
    std::sort(stratum->models.begin(), stratum->models.end());
    stratum->models.erase(std::unique(stratum->models.begin(), stratum->models.end()),
                          stratum->models.end());
    stratum->rng.seed(splitmix64(config_.seed ^ fnv1a(name)));
    const auto path = config_.log_dir / log_file_name(name);
    const auto events = read_event_log(path);
    stratum->state = std::make_shared<const TournamentState>(
        replay_log(name, stratum->models, events, config_.match));
    for (const auto& event : events) {
      stratum->seq_by_key.emplace(event.event_id, event.seq);
    }
    if (!events.empty()) {
      // Drop a torn tail so new appends start on a fresh line.
      std::string valid;
      for (const auto& event : events) valid += event_line(event);
      if (std::filesystem::file_size(path) != valid.size()) {
        std::ofstream rewrite(path, std::ios::binary | std::ios::trunc);
        rewrite << valid;
      }
    }
    stratum->fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (stratum->fd < 0) {
      throw Error(ErrorCode::kIoError, "cannot open event log " + path.string());
    }
    spdlog::info("stratum {}: {} models, {} events replayed", name,
                 stratum->models.size(), events.size());
    strata_.emplace(name, std::move(stratum));
  }
}

TournamentService::~TournamentService() {
  for (auto& [name, stratum] : strata_) {
    if (stratum->fd >= 0) ::close(stratum->fd);
  }
}

TournamentService::Stratum& TournamentService::find(const std::string& stratum) const {
  auto it = strata_.find(stratum);
  if (it == strata_.end()) {
    throw Error(ErrorCode::kUnknownStratum, "no tournament for stratum '" + stratum + "'");
  }
  return *it->second;
}

PairTicket TournamentService::next_pair(const std::string& stratum) {
  Stratum& entry = find(stratum);
  if (entry.models.size() < 2) {
    throw Error(ErrorCode::kTooFewModels, "stratum '" + stratum + "' has fewer than 2 models");
  }
  const auto state = entry.load();
  std::pair<ModelRef, ModelRef> pair;
  {
    std::lock_guard<std::mutex> lock(entry.rng_mutex);
    pair = select_pair(*state, config_.match, entry.rng);
  }
  PairTicket ticket;
  ticket.stratum = stratum;
  ticket.model_a = pair.first;
  ticket.model_b = pair.second;
  ticket.issued_at = utc_now();
  std::lock_guard<std::mutex> lock(ticket_mutex_);
  ticket.ticket_id = "t" + instance_ + "-" + std::to_string(++ticket_counter_);
  tickets_.emplace(ticket.ticket_id, ticket);
  return ticket;
}

SubmitAck TournamentService::submit_result(const std::string& stratum,
                                           const std::string& ticket_id,
                                           const std::string& outcome,
                                           const std::string& idempotency_key) {
  Stratum& entry = find(stratum);
  std::lock_guard<std::mutex> write_lock(entry.write_mutex);
  if (auto it = entry.seq_by_key.find(idempotency_key); it != entry.seq_by_key.end()) {
    return SubmitAck{it->second, true};
  }
  PairTicket ticket;
  {
    std::lock_guard<std::mutex> lock(ticket_mutex_);
    auto it = tickets_.find(ticket_id);
    if (it == tickets_.end() || it->second.stratum != stratum) {
      throw Error(ErrorCode::kUnknownTicket, "unknown ticket '" + ticket_id + "'");
    }
    ticket = it->second;
  }
  auto parsed = parse_outcome(outcome);
  if (!parsed) {
    throw Error(ErrorCode::kInvalidOutcome,
                "outcome must be A, tie or B, got '" + outcome + "'");
  }
  if (idempotency_key.empty()) {
    throw Error(ErrorCode::kEmptyId, "idempotency_key must be non-empty");
  }
  const auto current = entry.load();
  ResultEvent event;
  event.seq = current->log_cursor + 1;
  event.event_id = idempotency_key;
  event.stratum = stratum;
  event.model_a = ticket.model_a;
  event.model_b = ticket.model_b;
  event.outcome = *parsed;
  event.timestamp = utc_now();
  auto next = std::make_shared<TournamentState>(*current);
  next->apply(event, config_.match);
  write_all(entry.fd, event_line(event), config_.fsync);
  entry.seq_by_key.emplace(idempotency_key, event.seq);
  entry.store(std::move(next));
  {
    std::lock_guard<std::mutex> lock(ticket_mutex_);
    tickets_.erase(ticket_id);
  }
  return SubmitAck{event.seq, false};
}

std::vector<StandingRow> TournamentService::standings(const std::string& stratum) const {
  return standings_of(*find(stratum).load());
}

TournamentState TournamentService::snapshot(const std::string& stratum) const {
  return *find(stratum).load();
}

std::vector<std::string> TournamentService::strata() const {
  std::vector<std::string> names;
  for (const auto& [name, stratum] : strata_) names.push_back(name);
  return names;
}

struct HttpFrontEnd::Impl {
  TournamentService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(TournamentService& s) : service(s) { routes(); }

  static void send(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code,
                         const std::string& message) {
    ordered_json body;
    body["code"] = code;
    body["message"] = message;
    send(res, status, body);
  }

  static void send_error(httplib::Response& res, const Error& error) {
    switch (error.code()) {
      case ErrorCode::kUnknownStratum:
        return send_error(res, 404, "unknown_stratum", error.what());
      case ErrorCode::kUnknownTicket:
        return send_error(res, 404, "unknown_ticket", error.what());
      case ErrorCode::kTooFewModels:
        return send_error(res, 409, "too_few_models", error.what());
      case ErrorCode::kInvalidOutcome:
        return send_error(res, 422, "invalid_outcome", error.what());
      case ErrorCode::kEmptyId:
        return send_error(res, 400, "bad_request", error.what());
      default:
        return send_error(res, 500, "internal", error.what());
    }
  }

  template <typename Handler>
  void guarded(httplib::Response& res, Handler handler) {
    try {
      handler();
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  }

  void routes() {
    server.Get(R"(/tournaments/([^/]+)/next-pair)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const PairTicket ticket = service.next_pair(req.matches[1]);
                   ordered_json body;
                   body["ticket_id"] = ticket.ticket_id;
                   body["stratum"] = ticket.stratum;
                   body["model_a"] = ticket.model_a;
                   body["model_b"] = ticket.model_b;
                   body["issued_at"] = ticket.issued_at;
                   send(res, 200, body);
                 });
               });
    server.Post(R"(/tournaments/([^/]+)/results)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    json doc = json::parse(req.body, nullptr, false);
                    if (doc.is_discarded() || !doc.is_object()) {
                      return send_error(res, 400, "bad_request", "body is not a JSON object");
                    }
                    for (const char* field : {"ticket_id", "outcome", "idempotency_key"}) {
                      if (!doc.contains(field) || !doc[field].is_string()) {
                        return send_error(res, 400, "bad_request",
                                          std::string("missing string field ") + field);
                      }
                    }
                    const SubmitAck ack = service.submit_result(
                        req.matches[1], doc["ticket_id"].get<std::string>(),
                        doc["outcome"].get<std::string>(),
                        doc["idempotency_key"].get<std::string>());
                    ordered_json body;
                    body["seq"] = ack.seq;
                    send(res, 200, body);
                  });
                });
    server.Get(R"(/tournaments/([^/]+)/standings)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const std::string stratum = req.matches[1];
                   ordered_json rows = ordered_json::array();
                   for (const auto& row : service.standings(stratum)) {
                     ordered_json item;
                     item["model"] = row.model;
                     item["mu"] = row.mu;
                     item["sigma"] = row.sigma;
                     item["conservative"] = row.conservative;
                     item["plays"] = row.plays;
                     rows.push_back(std::move(item));
                   }
                   ordered_json body;
                   body["stratum"] = stratum;
                   body["standings"] = std::move(rows);
                   send(res, 200, body);
                 });
               });
  }
};

HttpFrontEnd::HttpFrontEnd(TournamentService& service)
    : impl_(std::make_unique<Impl>(service)) {}

HttpFrontEnd::~HttpFrontEnd() { stop(); }

int HttpFrontEnd::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpFrontEnd::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void HttpFrontEnd::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace arena
