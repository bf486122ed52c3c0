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

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pref_arena/error.hpp"
#include "pref_arena/io.hpp"
#include "pref_arena/simulator.hpp"

namespace arena {
namespace {

using nlohmann::json;

const char* kCanonical =
    R"({"id":"c1","metric":"overall","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"US","age":["18-34"],"ethnicity":["Hispanic"],"politics":["Democrat"]}})"
    "\n"
    R"({"id":"c2","metric":"trust","model_a":"m2","model_b":"m3","outcome":"tie","rater":{"country":"UK","age":[],"ethnicity":["White","Asian"],"politics":["Reform UK"]},"stratum":"UK:Reform UK"})"
    "\n"
    R"({"id":"c3","metric":"overall","model_a":"m3","model_b":"m1","outcome":"B","rater":{"country":"US","age":["55+"],"ethnicity":[],"politics":[]}})"
    "\n";

ErrorCode code_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

Dataset ingest_text(const std::string& text, const IngestOptions& options = {},
                    std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  return ingest_dataset(in, options, warnings);
}

TEST(Ingest, CanonicalLines) {
  const Dataset data = ingest_text(kCanonical);
  ASSERT_EQ(data.records.size(), 3u);
  EXPECT_EQ(data.models.labels(), (std::vector<std::string>{"m1", "m2", "m3"}));
  EXPECT_EQ(data.metrics.size(), 2);
  const auto& uk = data.records[1];
  EXPECT_EQ(uk.rater.country, Country::kUK);
  EXPECT_EQ(uk.rater.groups(Axis::kEthnicity),
            (std::vector<std::string>{"UK:White", "UK:Asian"}));
  EXPECT_EQ(uk.outcome, Outcome::kTie);
  EXPECT_EQ(uk.stratum, std::optional<std::string>("UK:Reform UK"));
  EXPECT_EQ(data.records[0].rater.groups(Axis::kAge), (std::vector<std::string>{"18-34"}));
  EXPECT_TRUE(data.group_index(Axis::kPolitics).find("US:Democrat").has_value());
}

TEST(Ingest, RoundTripIsLineEquivalent) {
  const Dataset data = ingest_text(kCanonical);
  std::ostringstream out;
  export_dataset(data, out);
  EXPECT_EQ(out.str(), kCanonical);
  EXPECT_EQ(ingest_text(out.str()).records, data.records);
}

TEST(Ingest, SimulatedRoundTrip) {
  std::mt19937_64 rng(3);
  const auto truth = sample_ground_truth(StudyDesign::desk_scale(4), {0.1, 0.1, 0.1}, {1.0}, rng);
  const Dataset data =
      run_campaign(truth, PopulationSpec::skewed(truth.design), Pairing::kAdaptive, 300, rng);
  std::ostringstream first;
  export_dataset(data, first);
  const Dataset again = ingest_text(first.str());
  EXPECT_EQ(again.records, data.records);
  std::ostringstream second;
  export_dataset(again, second);
  EXPECT_EQ(first.str(), second.str());
}

TEST(Ingest, MappingAdapter) {
  const json config = {
      {"fields",
       {{"id", "uid"}, {"model_a", "left.model"}, {"model_b", "right.model"},
        {"outcome", "verdict"}, {"country", "who.nation"}, {"politics", "who.party"}}},
      {"outcomes", {{"draw", "tie"}, {"left", "A"}, {"right", "B"}}}};
  IngestOptions options;
  options.mapping = FieldMapping::from_json(config);
  EXPECT_FALSE(options.mapping.is_canonical());
  const std::string line =
      R"({"uid":"x1","metric":"overall","left":{"model":"p"},"right":{"model":"q"},"verdict":"draw","who":{"nation":"US","party":["Republican"]}})";
  const auto record = parse_record_line(line, 1, options);
  EXPECT_EQ(record.outcome, Outcome::kTie);
  EXPECT_EQ(record.model_a, "p");
  EXPECT_EQ(record.rater.groups(Axis::kPolitics), (std::vector<std::string>{"US:Republican"}));
  EXPECT_TRUE(record.rater.groups(Axis::kAge).empty());
  EXPECT_TRUE(FieldMapping::canonical().is_canonical());
}

TEST(Ingest, ErrorsNameTheLine) {
  const std::string same =
      std::string(R"({"id":"a","metric":"overall","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"US"}})") +
      "\n" +
      R"({"id":"b","metric":"overall","model_a":"m1","model_b":"m1","outcome":"A","rater":{"country":"US"}})" +
      "\n";
  std::string message;
  EXPECT_EQ(code_of([&] { ingest_text(same); }, &message), ErrorCode::kValidationError);
  EXPECT_NE(message.find("line 2"), std::string::npos) << message;

  EXPECT_EQ(code_of([&] { ingest_text("{not json\n"); }, &message), ErrorCode::kParseError);
  EXPECT_NE(message.find("line 1"), std::string::npos);
  EXPECT_EQ(code_of([&] {
              ingest_text(R"({"id":"a","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"US"}})");
            }),
            ErrorCode::kMissingField);
  EXPECT_EQ(code_of([&] {
              ingest_text(R"({"id":"a","metric":"o","model_a":"m1","model_b":"m2","outcome":"maybe","rater":{"country":"US"}})");
            }),
            ErrorCode::kValidationError);
  EXPECT_EQ(code_of([&] {
              ingest_text(R"({"id":"a","metric":"o","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"FR"}})");
            }),
            ErrorCode::kValidationError);
  const std::string dup = std::string(kCanonical) + R"({"id":"c1","metric":"overall","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"US"}})" + "\n";
  EXPECT_EQ(code_of([&] { ingest_text(dup); }, &message), ErrorCode::kValidationError);
  EXPECT_NE(message.find("line 4"), std::string::npos) << message;
}

TEST(Ingest, UnknownFieldsWarnAndBlankLinesSkip) {
  std::vector<std::string> warnings;
  const Dataset data = ingest_text(
      std::string("\n") +
          R"({"id":"a","metric":"o","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"US"},"extra":1})" +
          "\n",
      {}, &warnings);
  EXPECT_EQ(data.records.size(), 1u);
  ASSERT_FALSE(warnings.empty());
  EXPECT_NE(warnings[0].find("extra"), std::string::npos);
  EXPECT_TRUE(ingest_text("").records.empty());
}

PosteriorDraws equal_skill_draws(int n_models, int n_draws) {
  PosteriorDraws draws;
  draws.spec.n_models = n_models;
  draws.metric = "overall";
  for (int i = 0; i < n_models; ++i) {
    draws.model_labels.push_back("model-" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  }
  draws.n_chains = 1;
  draws.n_draws_per_chain = n_draws;
  for (int d = 0; d < n_draws; ++d) {
    DrawSnapshot draw;
    draw.iteration = d;
    draw.theta = Eigen::VectorXd::Zero(n_models);
    for (auto& adjust : draw.adjust) adjust = Eigen::MatrixXd::Zero(n_models, 0);
    draw.nu = 1.0;
    draws.draws.push_back(draw);
  }
  return draws;
}

TEST(Draws, RoundTrip) {
  std::mt19937_64 rng(4);
  const auto truth = sample_ground_truth(StudyDesign::desk_scale(5), {0.3, 0.2, 0.1}, {0.7}, rng);
  PosteriorDraws draws = truth.as_draws(0);
  draws.draws.push_back(draws.draws[0]);
  draws.draws[1].iteration = 1;
  draws.draws[1].theta[0] = 1.0 / 3.0;
  draws.n_draws_per_chain = 2;
  draws.divergence_count = 2;
  draws.acceptance_rate = {0.8};
  draws.step_size = {0.1};
  std::stringstream buffer;
  write_draws(draws, buffer);
  const PosteriorDraws back = read_draws(buffer);
  EXPECT_EQ(back.metric, draws.metric);
  EXPECT_EQ(back.model_labels, draws.model_labels);
  EXPECT_EQ(back.group_labels, draws.group_labels);
  EXPECT_EQ(back.divergence_count, 2);
  EXPECT_EQ(back.spec.alpha, draws.spec.alpha);
  ASSERT_EQ(back.draws.size(), 2u);
  for (std::size_t d = 0; d < 2; ++d) {
    EXPECT_EQ(back.draws[d].flatten(), draws.draws[d].flatten());
  }
  std::stringstream again;
  write_draws(back, again);
  std::stringstream original;
  write_draws(draws, original);
  EXPECT_EQ(again.str(), original.str());

  std::istringstream empty("");
  EXPECT_EQ(code_of([&] { read_draws(empty); }), ErrorCode::kMissingDraws);
  EXPECT_EQ(code_of([&] { read_draws(std::filesystem::path("/nonexistent/draws.jsonl")); }),
            ErrorCode::kMissingDraws);
}

TEST(Census, ParseQualifiesLabels) {
  const json doc = {{"US",
                     {{"population", 258.0},
                      {"age", {{"18-34", 0.3}, {"35-54", 0.3}, {"55+", 0.4}}},
                      {"politics", {{"Democrat", 0.5}, {"Republican", 0.5}}}}},
                    {"UK", {{"population", 53.0}, {"ethnicity", {{"White", 1.0}}}}}};
  const CensusTable census = parse_census(doc);
  EXPECT_EQ(census.countries.at(Country::kUS).population, 258.0);
  EXPECT_EQ(census.countries.at(Country::kUS).axes[2].at("US:Democrat"), 0.5);
  EXPECT_EQ(census.countries.at(Country::kUK).axes[1].at("UK:White"), 1.0);
  EXPECT_EQ(code_of([] { parse_census(json{{"FR", json::object()}}); }), ErrorCode::kParseError);

  const CountryMix mix = parse_country_mix("US=0.6,UK=0.4");
  EXPECT_EQ(mix.at(Country::kUS), 0.6);
  EXPECT_EQ(mix.at(Country::kUK), 0.4);
  EXPECT_EQ(code_of([] { parse_country_mix("US:1"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_country_mix(""); }), ErrorCode::kConfigError);
}

TEST(Reports, FormattingSentinels) {
  EXPECT_EQ(format_number(std::nan(""), 3), "NA");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity(), 3), "NA");
  EXPECT_EQ(format_number(-0.0001, 3), "0.000");
  EXPECT_EQ(format_number(13.5, 3), "13.500");
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Reports, EqualSkillsPrintMidpointScore) {
  const PosteriorDraws draws = equal_skill_draws(28, 1);
  const auto board = baseline_leaderboard(draws);
  ASSERT_EQ(board.size(), 28u);
  std::ostringstream md;
  write_leaderboard_md(board, "overall", md);
  const std::string text = md.str();
  EXPECT_NE(text.find("| Model | Score | 95% CI | Expected Rank | P(best) |"), std::string::npos);
  int rows = 0;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("| model-", 0) != 0) continue;
    ++rows;
    EXPECT_NE(line.find("| 13.500 | [13.500, 13.500] |"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 28);
  EXPECT_EQ(text.find("nan"), std::string::npos);
}

TEST(Reports, SingleDrawCollapsesInterval) {
  std::mt19937_64 rng(5);
  const auto truth = sample_ground_truth(StudyDesign::desk_scale(6), {0.2, 0.2, 0.2}, {1.0}, rng);
  const auto board = baseline_leaderboard(truth.as_draws(0));
  for (const auto& entry : board) {
    EXPECT_EQ(entry.score_ci.first, entry.score_mean);
    EXPECT_EQ(entry.score_ci.second, entry.score_mean);
  }
  std::ostringstream a, b;
  write_leaderboard_csv({{"overall", "baseline", board}}, a);
  write_leaderboard_csv({{"overall", "baseline", baseline_leaderboard(truth.as_draws(0))}}, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("metric,scope,model,score,ci_low,ci_high,expected_rank,p_best\r\n", 0),
            0u);
}

TEST(Reports, DecompositionPanels) {
  RateTable table;
  table.row_axis = Axis::kAge;
  table.col_axis = Axis::kPolitics;
  table.row_groups = {"18-34", "55+"};
  table.col_groups = {"US:Democrat", "US:Republican"};
  table.rates.resize(2, 2);
  table.rates << 0.1, 0.2, 0.4, 0.3;
  table.counts = Eigen::MatrixXd::Constant(2, 2, 10.0);
  const auto result = anova_decompose(table);
  std::ostringstream observed, interaction, summary;
  write_decomposition_panel(table, result, DecompositionPanel::kObserved, observed);
  write_decomposition_panel(table, result, DecompositionPanel::kInteraction, interaction);
  EXPECT_NE(observed.str().find("Democrat"), std::string::npos);
  EXPECT_NE(interaction.str().find("-0.05"), std::string::npos) << interaction.str();
  write_decomposition_summary({{Country::kUS, table, result}}, summary);
  EXPECT_NE(summary.str().find("0.2"), std::string::npos) << summary.str();
}

TEST(Reports, DiagnosticsUseSentinels) {
  Diagnostics diagnostics;
  diagnostics.names = {"theta[a]"};
  diagnostics.rhat = {std::nan("")};
  diagnostics.ess = {std::nan("")};
  const auto doc = diagnostics_json(diagnostics, "overall");
  EXPECT_EQ(doc.dump().find("null"), std::string::npos) << doc.dump();
}

}  // namespace
}  // namespace arena
