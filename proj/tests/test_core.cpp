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

#include <gtest/gtest.h>

#include "pref_arena/core.hpp"
#include "pref_arena/error.hpp"
#include "test_support.hpp"

namespace arena {
namespace {

using testing::make_record;

ComparisonRecord valid_record() {
  ComparisonRecord record = make_record("r1", "X", "Y", Outcome::kWinA);
  record.rater.country = Country::kUS;
  record.rater.groups(Axis::kAge) = {"18-34"};
  record.rater.groups(Axis::kPolitics) = {"US:Democrat"};
  return record;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kInvalidArgument;
}

TEST(CoreValidate, SelfComparisonRejected) {
  ComparisonRecord record = valid_record();
  record.model_b = record.model_a;
  EXPECT_EQ(code_of([&] { validate_record(record, Registry::standard()); }),
            ErrorCode::kSelfComparison);
}

TEST(CoreValidate, ValidRecordPassesUnchanged) {
  const ComparisonRecord record = valid_record();
  EXPECT_EQ(validate_record(record, Registry::standard()), record);
}

TEST(CoreValidate, PoliticsLabelOnAgeAxisIsUnknownGroup) {
  ComparisonRecord record = valid_record();
  record.rater.groups(Axis::kAge) = {"US:Democrat"};
  EXPECT_EQ(code_of([&] { validate_record(record, Registry::standard()); }),
            ErrorCode::kUnknownGroup);
  EXPECT_EQ(code_of([&] { check_record(record); }), ErrorCode::kUnknownGroup);
}

TEST(CoreValidate, UnknownModelAndEmptyId) {
  Registry registry = Registry::standard();
  registry.models = {"X", "Z"};
  EXPECT_EQ(code_of([&] { validate_record(valid_record(), registry); }),
            ErrorCode::kUnknownModel);
  ComparisonRecord record = valid_record();
  record.id.clear();
  EXPECT_EQ(code_of([&] { validate_record(record, Registry::standard()); }),
            ErrorCode::kEmptyId);
}

TEST(CoreValidate, ForeignNamespaceAndDuplicates) {
  ComparisonRecord record = valid_record();
  record.rater.groups(Axis::kPolitics) = {"UK:Labour"};
  EXPECT_EQ(code_of([&] { check_record(record); }), ErrorCode::kUnknownGroup);
  record.rater.groups(Axis::kPolitics) = {"US:Democrat", "US:Democrat"};
  EXPECT_EQ(code_of([&] { check_record(record); }), ErrorCode::kDuplicateGroup);
}

// Random single mutations of a valid record: validation accepts iff no
// invariant was broken.
TEST(CoreValidate, MutationProperty) {
  std::mt19937_64 rng(7);
  const Registry registry = Registry::standard();
  const std::vector<std::string> politics = {"US:Democrat", "US:Republican",
                                             "UK:Labour", "Democrat-ish"};
  for (int trial = 0; trial < 500; ++trial) {
    ComparisonRecord record = valid_record();
    bool should_pass = true;
    switch (rng() % 6) {
      case 0:
        record.model_b = "X";
        should_pass = false;
        break;
      case 1:
        record.id = rng() % 2 ? "" : "id";
        should_pass = !record.id.empty();
        break;
      case 2: {
        const std::string& label = politics[rng() % politics.size()];
        record.rater.groups(Axis::kPolitics) = {label};
        should_pass = label.rfind("US:", 0) == 0;
        break;
      }
      case 3:
        record.rater.groups(Axis::kAge).push_back(rng() % 2 ? "35-54" : "18-34");
        should_pass = record.rater.groups(Axis::kAge).back() != "18-34";
        break;
      case 4:
        record.rater.groups(Axis::kEthnicity) = {rng() % 2 ? "US:White" : "US:Martian"};
        should_pass = record.rater.groups(Axis::kEthnicity)[0] == "US:White";
        break;
      default:
        record.rater.groups(Axis::kAge).clear();
        break;
    }
    bool passed = true;
    try {
      validate_record(record, registry);
    } catch (const Error&) {
      passed = false;
    }
    EXPECT_EQ(passed, should_pass) << "trial " << trial;
  }
}

TEST(CoreIndex, LexicographicAndIdempotent) {
  std::vector<ComparisonRecord> records = {
      make_record("c", "Y", "X", Outcome::kTie), make_record("a", "X", "Y", Outcome::kWinA),
      make_record("b", "Y", "X", Outcome::kWinB)};
  const Dataset first = build_index(records);
  EXPECT_EQ(first.models.size(), 2);
  EXPECT_EQ(first.models.at("X"), 0);
  EXPECT_EQ(first.models.at("Y"), 1);
  const Dataset second = build_index(records);
  EXPECT_EQ(first.models, second.models);
  EXPECT_EQ(first.metrics, second.metrics);
  for (int slot = 0; slot < kNumAxes; ++slot) EXPECT_EQ(first.groups[slot], second.groups[slot]);
}

TEST(CoreIndex, EmptyRecords) {
  const Dataset dataset = build_index({});
  EXPECT_TRUE(dataset.models.empty());
  EXPECT_TRUE(dataset.metrics.empty());
  EXPECT_TRUE(dataset.records.empty());
  EXPECT_EQ(code_of([&] { (void)dataset.models.label(0); }), ErrorCode::kIndexOutOfRange);
}

TEST(CoreMembership, WeightsPerAxis) {
  const LabelIndex age = LabelIndex::from_labels(std::vector<std::string>{"18-34", "35-54", "55+"});
  const LabelIndex politics = LabelIndex::from_labels(
      std::vector<std::string>{"US:Democrat", "US:Independent", "US:Republican"});
  RaterProfile rater;
  rater.groups(Axis::kAge) = {"35-54"};
  rater.groups(Axis::kPolitics) = {"US:Democrat", "US:Republican"};
  const Eigen::VectorXd w_age = membership_weights(rater, Axis::kAge, age);
  EXPECT_EQ(w_age, Eigen::Vector3d(0.0, 1.0, 0.0));
  const Eigen::VectorXd w_pol = membership_weights(rater, Axis::kPolitics, politics);
  EXPECT_EQ(w_pol, Eigen::Vector3d(0.5, 0.0, 0.5));
  const Eigen::VectorXd w_eth = membership_weights(rater, Axis::kEthnicity, LabelIndex());
  EXPECT_EQ(w_eth.size(), 0);
  const Eigen::VectorXd none = membership_weights(RaterProfile{}, Axis::kAge, age);
  EXPECT_EQ(none, Eigen::Vector3d::Zero());
}

TEST(CoreMembership, SumsToOneWithMNonzeros) {
  std::mt19937_64 rng(3);
  std::vector<std::string> labels;
  for (int g = 0; g < 7; ++g) labels.push_back("g" + std::to_string(g));
  const LabelIndex index = LabelIndex::from_labels(labels);
  for (int trial = 0; trial < 200; ++trial) {
    RaterProfile rater;
    for (const auto& label : labels) {
      if (rng() % 3 == 0) rater.groups(Axis::kAge).push_back(label);
    }
    const auto m = rater.groups(Axis::kAge).size();
    const Eigen::VectorXd w = membership_weights(rater, Axis::kAge, index);
    EXPECT_EQ(static_cast<std::size_t>((w.array() != 0.0).count()), m);
    if (m > 0) {
      EXPECT_NEAR(w.sum(), 1.0, 1e-15);
      for (Eigen::Index g = 0; g < w.size(); ++g) {
        if (w[g] != 0.0) {
          EXPECT_EQ(w[g], 1.0 / static_cast<double>(m));
        }
      }
    }
  }
}

TEST(CoreLabels, QualifyRoundTrip) {
  EXPECT_EQ(qualify_group(Country::kUK, Axis::kPolitics, "Labour"), "UK:Labour");
  EXPECT_EQ(qualify_group(Country::kUK, Axis::kAge, "55+"), "55+");
  EXPECT_EQ(unqualify_group(Country::kUK, Axis::kPolitics, "UK:Labour"), "Labour");
  EXPECT_EQ(parse_outcome("tie"), Outcome::kTie);
  EXPECT_FALSE(parse_outcome("draw").has_value());
}

}  // namespace
}  // namespace arena
