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

// Dataset ingestion and export (canonical JSONL plus a field-mapping
// adapter), draw and census files, diagnostics, and report writers.

#ifndef PREF_ARENA_IO_HPP_
#define PREF_ARENA_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pref_arena/core.hpp"
#include "pref_arena/decompose.hpp"
#include "pref_arena/sampler.hpp"
#include "pref_arena/scoring.hpp"

namespace arena {

// Where each canonical field lives in a source line. Paths are dotted
// ("rater.country"); outcome_map translates source outcome tokens.
struct FieldMapping {
  std::string id = "id";
  std::string metric = "metric";
  std::string model_a = "model_a";
  std::string model_b = "model_b";
  std::string outcome = "outcome";
  std::string stratum = "stratum";
  std::string country = "rater.country";
  std::array<std::string, kNumAxes> axes = {"rater.age", "rater.ethnicity",
                                            "rater.politics"};
  std::map<std::string, std::string> outcome_map;

  static FieldMapping canonical() { return FieldMapping(); }
  // {"fields": {"model_a": "left.model", ...}, "outcomes": {"draw": "tie"}}
  static FieldMapping from_json(const nlohmann::json& config);
  static FieldMapping load(const std::filesystem::path& path);
  bool is_canonical() const;
};

struct IngestOptions {
  FieldMapping mapping;
  const Registry* registry = nullptr;  // optional stricter validation
};

// Parses one line. Errors carry the 1-based line number in their message.
ComparisonRecord parse_record_line(const std::string& line, int line_number,
                                   const IngestOptions& options,
                                   std::vector<std::string>* warnings = nullptr);

// Reads every line, then throws the first error (kParseError,
// kValidationError or kMissingField) listing all failing lines, or returns
// the indexed dataset.
Dataset ingest_dataset(std::istream& in, const IngestOptions& options = {},
                       std::vector<std::string>* warnings = nullptr);
Dataset ingest_dataset(const std::filesystem::path& path,
                       const IngestOptions& options = {},
                       std::vector<std::string>* warnings = nullptr);

// Canonical line with bare (country-local) group labels and fixed key order.
std::string export_record(const ComparisonRecord& record);
void export_dataset(const Dataset& dataset, std::ostream& out);

// Draw files: a header line followed by one line per draw with flattened
// named parameters.
void write_draws(const PosteriorDraws& draws, std::ostream& out);
PosteriorDraws read_draws(std::istream& in);
PosteriorDraws read_draws(const std::filesystem::path& path);

// {"US": {"population": n, "age": {"18-34": w, ...}, ...}, "UK": {...}}.
// Bare ethnicity/politics labels are qualified with the country.
CensusTable parse_census(const nlohmann::json& doc);
CensusTable load_census(const std::filesystem::path& path);

// "US=0.6,UK=0.4".
CountryMix parse_country_mix(const std::string& text);

nlohmann::ordered_json diagnostics_json(const Diagnostics& diagnostics,
                                        const std::string& metric);

// Fixed-precision number; non-finite values render as "NA".
std::string format_number(double value, int precision);
// RFC 4180 field quoting.
std::string csv_field(const std::string& value);

void write_leaderboard_md(const std::vector<LeaderboardEntry>& entries,
                          const std::string& title, std::ostream& out);
// One leaderboard per metric and scope ("combined", "US", "UK", "baseline").
struct ScopedLeaderboard {
  MetricRef metric;
  std::string scope;
  std::vector<LeaderboardEntry> entries;
};
using MetricLeaderboards = std::vector<ScopedLeaderboard>;
void write_leaderboard_csv(const MetricLeaderboards& boards, std::ostream& out);
void write_tie_rates_csv(const std::vector<TieRateReport>& rows,
                         std::ostream& out);
void write_rank_shift_csv(
    const std::vector<std::pair<MetricRef, RankShiftReport>>& reports,
    std::ostream& out);

enum class DecompositionPanel { kObserved, kAdditive, kInteraction };
void write_decomposition_panel(const RateTable& table,
                               const DecompositionResult& result,
                               DecompositionPanel panel, std::ostream& out);

struct DecompositionSummaryRow {
  Country country = Country::kUS;
  RateTable table;
  DecompositionResult result;
};
void write_decomposition_summary(const std::vector<DecompositionSummaryRow>& rows,
                                 std::ostream& out);

}  // namespace arena

#endif  // PREF_ARENA_IO_HPP_
