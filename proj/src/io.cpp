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

#include "pref_arena/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pref_arena/error.hpp"

namespace arena {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const json* lookup(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string key =
        path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object()) return nullptr;
    auto it = node->find(key);
    if (it == node->end() || it->is_null()) return nullptr;
    node = &*it;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

std::string where(int line_number) {
  return "line " + std::to_string(line_number) + ": ";
}

std::string required_string(const json& doc, const std::string& path,
                            int line_number) {
  const json* node = lookup(doc, path);
  if (node == nullptr) {
    throw Error(ErrorCode::kMissingField,
                where(line_number) + "missing field '" + path + "'");
  }
  if (node->is_string()) return node->get<std::string>();
  if (node->is_number_integer()) return node->dump();
  throw Error(ErrorCode::kParseError,
              where(line_number) + "field '" + path + "' is not a string");
}

std::vector<std::string> label_list(const json* node, const std::string& path,
                                    int line_number) {
  std::vector<std::string> out;
  if (node == nullptr) return out;
  if (node->is_string()) {
    out.push_back(node->get<std::string>());
    return out;
  }
  if (!node->is_array()) {
    throw Error(ErrorCode::kParseError,
                where(line_number) + "field '" + path + "' is not a label list");
  }
  for (const auto& item : *node) {
    if (!item.is_string()) {
      throw Error(ErrorCode::kParseError,
                  where(line_number) + "field '" + path + "' holds a non-string");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

void warn_unknown_fields(const json& doc, int line_number,
                         std::vector<std::string>* warnings) {
  static const std::set<std::string> kTop = {"id",      "metric",  "model_a",
                                             "model_b", "outcome", "rater",
                                             "stratum"};
  static const std::set<std::string> kRater = {"country", "age", "ethnicity",
                                               "politics"};
  auto note = [&](const std::string& key) {
    const std::string message = where(line_number) + "ignoring unknown field '" + key + "'";
    spdlog::warn("{}", message);
    if (warnings != nullptr) warnings->push_back(message);
  };
  for (const auto& [key, value] : doc.items()) {
    if (kTop.count(key) == 0) note(key);
  }
  if (auto it = doc.find("rater"); it != doc.end() && it->is_object()) {
    for (const auto& [key, value] : it->items()) {
      if (kRater.count(key) == 0) note("rater." + key);
    }
  }
}

double finite_or(double value, double fallback) {
  return std::isfinite(value) ? value : fallback;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) row += ',';
    row += csv_field(fields[i]);
  }
  return row + "\r\n";
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return in;
}

}  // namespace

FieldMapping FieldMapping::from_json(const nlohmann::json& config) {
  FieldMapping mapping;
  if (!config.is_object()) {
    throw Error(ErrorCode::kConfigError, "mapping must be a JSON object");
  }
  if (auto fields = config.find("fields"); fields != config.end()) {
    for (const auto& [key, value] : fields->items()) {
      if (!value.is_string()) {
        throw Error(ErrorCode::kConfigError, "mapping for '" + key + "' is not a string");
      }
      const std::string path = value.get<std::string>();
      if (key == "id") mapping.id = path;
      else if (key == "metric") mapping.metric = path;
      else if (key == "model_a") mapping.model_a = path;
      else if (key == "model_b") mapping.model_b = path;
      else if (key == "outcome") mapping.outcome = path;
      else if (key == "stratum") mapping.stratum = path;
      else if (key == "rater.country" || key == "country") mapping.country = path;
      else if (auto axis = parse_axis(key.rfind("rater.", 0) == 0 ? key.substr(6) : key))
        mapping.axes[axis_slot(*axis)] = path;
      else throw Error(ErrorCode::kConfigError, "unknown mapped field '" + key + "'");
    }
  }
  if (auto outcomes = config.find("outcomes"); outcomes != config.end()) {
    for (const auto& [key, value] : outcomes->items()) {
      if (!value.is_string() || !parse_outcome(value.get<std::string>())) {
        throw Error(ErrorCode::kConfigError,
                    "outcome mapping for '" + key + "' must be A, tie or B");
      }
      mapping.outcome_map[key] = value.get<std::string>();
    }
  }
  return mapping;
}

FieldMapping FieldMapping::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

bool FieldMapping::is_canonical() const {
  const FieldMapping base;
  return id == base.id && metric == base.metric && model_a == base.model_a &&
         model_b == base.model_b && outcome == base.outcome &&
         stratum == base.stratum && country == base.country && axes == base.axes;
}

ComparisonRecord parse_record_line(const std::string& line, int line_number,
                                   const IngestOptions& options,
                                   std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, where(line_number) + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kParseError, where(line_number) + "not a JSON object");
  }
  const FieldMapping& m = options.mapping;
  if (m.is_canonical()) warn_unknown_fields(doc, line_number, warnings);

  ComparisonRecord record;
  record.id = required_string(doc, m.id, line_number);
  record.metric = required_string(doc, m.metric, line_number);
  record.model_a = required_string(doc, m.model_a, line_number);
  record.model_b = required_string(doc, m.model_b, line_number);
  std::string outcome = required_string(doc, m.outcome, line_number);
  if (auto it = m.outcome_map.find(outcome); it != m.outcome_map.end()) {
    outcome = it->second;
  }
  auto parsed = parse_outcome(outcome);
  if (!parsed) {
    throw Error(ErrorCode::kValidationError,
                where(line_number) + "invalid outcome '" + outcome + "'");
  }
  record.outcome = *parsed;
  const std::string country = required_string(doc, m.country, line_number);
  auto parsed_country = parse_country(country);
  if (!parsed_country) {
    throw Error(ErrorCode::kValidationError,
                where(line_number) + "unknown country '" + country + "'");
  }
  record.rater.country = *parsed_country;
  for (Axis axis : kAllAxes) {
    const std::string& path = m.axes[axis_slot(axis)];
    for (const auto& label : label_list(lookup(doc, path), path, line_number)) {
      record.rater.groups(axis).push_back(
          qualify_group(record.rater.country, axis, label));
    }
  }
  if (const json* stratum = lookup(doc, m.stratum)) {
    if (!stratum->is_string()) {
      throw Error(ErrorCode::kParseError,
                  where(line_number) + "field 'stratum' is not a string");
    }
    record.stratum = stratum->get<std::string>();
  }
  try {
    if (options.registry != nullptr) {
      validate_record(record, *options.registry);
    } else {
      check_record(record);
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kValidationError, where(line_number) + e.what());
  }
  return record;
}

Dataset ingest_dataset(std::istream& in, const IngestOptions& options,
                       std::vector<std::string>* warnings) {
  std::vector<ComparisonRecord> records;
  std::optional<ErrorCode> first_code;
  std::string failures;
  int failure_count = 0;
  std::set<std::string> seen_ids;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      ComparisonRecord record = parse_record_line(line, line_number, options, warnings);
      if (!seen_ids.insert(record.id).second) {
        throw Error(ErrorCode::kValidationError,
                    where(line_number) + "duplicate id '" + record.id + "'");
      }
      records.push_back(std::move(record));
    } catch (const Error& e) {
      if (!first_code) first_code = e.code();
      if (++failure_count <= 20) failures += std::string("\n  ") + e.what();
    }
  }
  if (first_code) {
    if (failure_count > 20) {
      failures += "\n  ... " + std::to_string(failure_count - 20) + " more";
    }
    throw Error(*first_code,
                std::to_string(failure_count) + " invalid line(s):" + failures);
  }
  return build_index(std::move(records));
}

Dataset ingest_dataset(const std::filesystem::path& path,
                       const IngestOptions& options,
                       std::vector<std::string>* warnings) {
  auto in = open_input(path);
  return ingest_dataset(in, options, warnings);
}

std::string export_record(const ComparisonRecord& record) {
  ordered_json doc;
  doc["id"] = record.id;
  doc["metric"] = record.metric;
  doc["model_a"] = record.model_a;
  doc["model_b"] = record.model_b;
  doc["outcome"] = std::string(outcome_token(record.outcome));
  ordered_json rater;
  rater["country"] = std::string(country_name(record.rater.country));
  for (Axis axis : kAllAxes) {
    ordered_json labels = ordered_json::array();
    for (const auto& label : record.rater.groups(axis)) {
      labels.push_back(unqualify_group(record.rater.country, axis, label));
    }
    rater[std::string(axis_name(axis))] = std::move(labels);
  }
  doc["rater"] = std::move(rater);
  if (record.stratum) doc["stratum"] = *record.stratum;
  return doc.dump();
}

void export_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& record : dataset.records) out << export_record(record) << '\n';
}

void write_draws(const PosteriorDraws& draws, std::ostream& out) {
  ordered_json header;
  header["format"] = "pref-arena-draws";
  header["version"] = 1;
  header["metric"] = draws.metric;
  header["models"] = draws.model_labels;
  ordered_json groups;
  for (Axis axis : kAllAxes) {
    groups[std::string(axis_name(axis))] = draws.group_labels[axis_slot(axis)];
  }
  header["groups"] = std::move(groups);
  header["alpha"] = draws.spec.alpha;
  header["tau_prior_rate"] = draws.spec.tau_prior_rate;
  header["theta_prior_sd"] = draws.spec.theta_prior_sd;
  header["log_nu_prior_sd"] = draws.spec.log_nu_prior_sd;
  header["n_chains"] = draws.n_chains;
  header["n_draws_per_chain"] = draws.n_draws_per_chain;
  header["divergence_count"] = draws.divergence_count;
  header["acceptance_rate"] = draws.acceptance_rate;
  header["step_size"] = draws.step_size;
  out << header.dump() << '\n';
  const auto names = draws.scalar_names();
  for (const auto& draw : draws.draws) {
    ordered_json line;
    line["chain"] = draw.chain;
    line["iteration"] = draw.iteration;
    const Eigen::VectorXd flat = draw.flatten();
    for (std::size_t i = 0; i < names.size(); ++i) line[names[i]] = flat[i];
    out << line.dump() << '\n';
  }
}

PosteriorDraws read_draws(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kMissingDraws, "draw file is empty");
  }
  PosteriorDraws draws;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "pref-arena-draws") {
      throw Error(ErrorCode::kParseError, "not a draw file");
    }
    draws.metric = header.at("metric").get<std::string>();
    draws.model_labels = header.at("models").get<std::vector<std::string>>();
    draws.spec.n_models = static_cast<int>(draws.model_labels.size());
    for (Axis axis : kAllAxes) {
      const int slot = axis_slot(axis);
      draws.group_labels[slot] =
          header.at("groups").at(std::string(axis_name(axis))).get<std::vector<std::string>>();
      draws.spec.n_groups[slot] = static_cast<int>(draws.group_labels[slot].size());
    }
    draws.spec.alpha = header.at("alpha").get<double>();
    draws.spec.tau_prior_rate = header.value("tau_prior_rate", draws.spec.tau_prior_rate);
    draws.spec.theta_prior_sd = header.value("theta_prior_sd", draws.spec.theta_prior_sd);
    draws.spec.log_nu_prior_sd = header.value("log_nu_prior_sd", draws.spec.log_nu_prior_sd);
    draws.n_chains = header.at("n_chains").get<int>();
    draws.n_draws_per_chain = header.at("n_draws_per_chain").get<int>();
    draws.divergence_count = header.value("divergence_count", 0);
    draws.acceptance_rate = header.value("acceptance_rate", std::vector<double>());
    draws.step_size = header.value("step_size", std::vector<double>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("draw header: ") + e.what());
  }
  const auto names = draws.scalar_names();
  const int n = draws.spec.n_models;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      const json doc = json::parse(line);
      DrawSnapshot draw;
      draw.chain = doc.at("chain").get<int>();
      draw.iteration = doc.at("iteration").get<int>();
      std::size_t k = 0;
      auto next = [&]() { return doc.at(names[k++]).get<double>(); };
      draw.theta.resize(n);
      for (int i = 0; i < n; ++i) draw.theta[i] = next();
      for (int slot = 0; slot < kNumAxes; ++slot) {
        draw.adjust[slot].resize(n, draws.spec.n_groups[slot]);
        for (int i = 0; i < n; ++i) {
          for (int g = 0; g < draws.spec.n_groups[slot]; ++g) {
            draw.adjust[slot](i, g) = next();
          }
        }
      }
      for (int slot = 0; slot < kNumAxes; ++slot) draw.tau[slot] = next();
      draw.nu = next();
      draws.draws.push_back(std::move(draw));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, where(line_number) + e.what());
    }
  }
  if (draws.draws.empty()) throw Error(ErrorCode::kMissingDraws, "no draws in file");
  if (static_cast<std::size_t>(draws.n_chains) * draws.n_draws_per_chain !=
      draws.draws.size()) {
    draws.n_chains = 1;
    draws.n_draws_per_chain = static_cast<int>(draws.draws.size());
  }
  return draws;
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingDraws, "cannot open " + path.string());
  return read_draws(in);
}

CensusTable parse_census(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "census must be an object");
  CensusTable census;
  for (const auto& [key, value] : doc.items()) {
    auto country = parse_country(key);
    if (!country) throw Error(ErrorCode::kParseError, "unknown census country " + key);
    auto& entry = census.countries[*country];
    entry.population = value.value("population", 0.0);
    for (Axis axis : kAllAxes) {
      auto it = value.find(std::string(axis_name(axis)));
      if (it == value.end()) continue;
      for (const auto& [label, weight] : it->items()) {
        if (!weight.is_number()) {
          throw Error(ErrorCode::kParseError, "census weight for " + label + " is not a number");
        }
        entry.axes[axis_slot(axis)][qualify_group(*country, axis, label)] =
            weight.get<double>();
      }
    }
  }
  return census;
}

CensusTable load_census(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_census(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

CountryMix parse_country_mix(const std::string& text) {
  CountryMix mix;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto eq = item.find('=');
    auto country = eq == std::string::npos ? std::nullopt
                                           : parse_country(item.substr(0, eq));
    if (!country) {
      throw Error(ErrorCode::kConfigError, "bad country mix entry '" + item + "'");
    }
    try {
      mix[*country] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, "bad country mix weight '" + item + "'");
    }
  }
  if (mix.empty()) throw Error(ErrorCode::kConfigError, "empty country mix");
  return mix;
}

nlohmann::ordered_json diagnostics_json(const Diagnostics& diagnostics,
                                        const std::string& metric) {
  ordered_json doc;
  doc["metric"] = metric;
  doc["max_rhat"] = finite_or(diagnostics.max_rhat(), kRhatSentinel);
  doc["min_ess"] = finite_or(diagnostics.min_ess(), 0.0);
  doc["divergences"] = diagnostics.divergence_count;
  doc["acceptance_rate"] = diagnostics.acceptance_rate;
  ordered_json parameters = ordered_json::array();
  for (std::size_t i = 0; i < diagnostics.names.size(); ++i) {
    ordered_json entry;
    entry["name"] = diagnostics.names[i];
    entry["rhat"] = finite_or(diagnostics.rhat[i], kRhatSentinel);
    entry["ess"] = finite_or(diagnostics.ess[i], 0.0);
    parameters.push_back(std::move(entry));
  }
  doc["parameters"] = std::move(parameters);
  return doc;
}

std::string format_number(double value, int precision) {
  if (!std::isfinite(value)) return "NA";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", precision, value);
  std::string text = buffer;
  if (text.find_first_not_of("-0.") == std::string::npos && text[0] == '-') {
    text.erase(0, 1);
  }
  return text;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

void write_leaderboard_md(const std::vector<LeaderboardEntry>& entries,
                          const std::string& title, std::ostream& out) {
  if (!title.empty()) out << "## " << title << "\n\n";
  out << "| Model | Score | 95% CI | Expected Rank | P(best) |\n";
  out << "|---|---:|---:|---:|---:|\n";
  for (const auto& entry : entries) {
    out << "| " << entry.model << " | " << format_number(entry.score_mean, 3)
        << " | [" << format_number(entry.score_ci.first, 3) << ", "
        << format_number(entry.score_ci.second, 3) << "] | "
        << format_number(entry.expected_rank, 2) << " | "
        << format_number(entry.p_best, 3) << " |\n";
  }
}

void write_leaderboard_csv(const MetricLeaderboards& boards, std::ostream& out) {
  out << csv_row({"metric", "scope", "model", "score", "ci_low", "ci_high",
                  "expected_rank", "p_best"});
  for (const auto& board : boards) {
    for (const auto& entry : board.entries) {
      out << csv_row({board.metric, board.scope, entry.model, format_number(entry.score_mean, 6),
                      format_number(entry.score_ci.first, 6),
                      format_number(entry.score_ci.second, 6),
                      format_number(entry.expected_rank, 6),
                      format_number(entry.p_best, 6)});
    }
  }
}

void write_tie_rates_csv(const std::vector<TieRateReport>& rows,
                         std::ostream& out) {
  out << csv_row({"metric", "age_group", "tie_rate", "n"});
  for (const auto& row : rows) {
    out << csv_row({row.metric.value_or("all"), row.age_group.value_or("all"),
                    format_number(row.tie_rate, 6), std::to_string(row.n)});
  }
}

void write_rank_shift_csv(
    const std::vector<std::pair<MetricRef, RankShiftReport>>& reports,
    std::ostream& out) {
  out << csv_row({"metric", "axis", "model", "group", "overall_rank", "group_rank",
                  "abs_shift", "model_shift", "axis_shift"});
  for (const auto& [metric, report] : reports) {
    for (std::size_t i = 0; i < report.models.size(); ++i) {
      for (std::size_t g = 0; g < report.groups.size(); ++g) {
        const double overall = report.overall_rank[i];
        const double group = report.group_rank(i, g);
        out << csv_row({metric, std::string(axis_name(report.axis)), report.models[i],
                        report.groups[g], format_number(overall, 6),
                        format_number(group, 6),
                        format_number(std::abs(group - overall), 6),
                        format_number(report.model_shift[i], 6),
                        format_number(report.axis_shift, 6)});
      }
    }
  }
}

void write_decomposition_panel(const RateTable& table,
                               const DecompositionResult& result,
                               DecompositionPanel panel, std::ostream& out) {
  const Eigen::MatrixXd& values =
      panel == DecompositionPanel::kObserved   ? table.rates
      : panel == DecompositionPanel::kAdditive ? result.additive
                                               : result.interaction;
  std::vector<std::string> header = {std::string(axis_name(table.row_axis)) +
                                     "\\" + std::string(axis_name(table.col_axis))};
  header.insert(header.end(), table.col_groups.begin(), table.col_groups.end());
  out << csv_row(header);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    std::vector<std::string> row = {table.row_groups[i]};
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      row.push_back(format_number(values(i, j), 6));
    }
    out << csv_row(row);
  }
}

void write_decomposition_summary(const std::vector<DecompositionSummaryRow>& rows,
                                 std::ostream& out) {
  out << csv_row({"country", "row_axis", "col_axis", "rows", "cols",
                  "interaction_share", "interaction_share_weighted",
                  "max_abs_interaction", "mean_abs_interaction"});
  for (const auto& row : rows) {
    const auto& r = row.result;
    out << csv_row({std::string(country_name(row.country)),
                    std::string(axis_name(row.table.row_axis)),
                    std::string(axis_name(row.table.col_axis)),
                    std::to_string(row.table.row_groups.size()),
                    std::to_string(row.table.col_groups.size()),
                    format_number(r.variance_share_interaction, 6),
                    r.variance_share_interaction_weighted
                        ? format_number(*r.variance_share_interaction_weighted, 6)
                        : "NA",
                    format_number(r.max_abs_interaction, 6),
                    format_number(r.mean_abs_interaction, 6)});
  }
}

}  // namespace arena
