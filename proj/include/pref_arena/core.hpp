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

// Domain vocabulary shared by every module: comparison records, rater
// profiles, group/model registries, and the dense indices the numerical code
// works against.

#ifndef PREF_ARENA_CORE_HPP_
#define PREF_ARENA_CORE_HPP_

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace arena {

enum class Axis { kAge = 0, kEthnicity = 1, kPolitics = 2 };
inline constexpr int kNumAxes = 3;
inline constexpr std::array<Axis, kNumAxes> kAllAxes = {
    Axis::kAge, Axis::kEthnicity, Axis::kPolitics};

constexpr int axis_slot(Axis axis) { return static_cast<int>(axis); }
std::string_view axis_name(Axis axis);
std::optional<Axis> parse_axis(std::string_view name);

enum class Country { kUS, kUK };
inline constexpr std::array<Country, 2> kAllCountries = {Country::kUS,
                                                         Country::kUK};
std::string_view country_name(Country country);
std::optional<Country> parse_country(std::string_view name);

enum class Outcome { kWinA, kTie, kWinB };
// Canonical wire tokens: "A", "tie", "B".
std::string_view outcome_token(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view token);

using ModelRef = std::string;
using MetricRef = std::string;

struct GroupRef {
  Axis axis;
  std::string label;
  auto operator<=>(const GroupRef&) const = default;
};

// Ethnicity and politics labels live in a per-country namespace
// ("US:Democrat"); age labels are shared across countries.
std::string qualify_group(Country country, Axis axis, std::string_view label);
// Inverse of qualify_group for labels belonging to `country`; other labels are
// returned unchanged.
std::string unqualify_group(Country country, Axis axis, std::string_view label);
// Country namespace of a qualified label, if any.
std::optional<Country> group_country(std::string_view label);

struct RaterProfile {
  Country country = Country::kUS;
  std::array<std::vector<std::string>, kNumAxes> memberships;

  const std::vector<std::string>& groups(Axis axis) const {
    return memberships[axis_slot(axis)];
  }
  std::vector<std::string>& groups(Axis axis) {
    return memberships[axis_slot(axis)];
  }
  bool operator==(const RaterProfile&) const = default;
};

struct ComparisonRecord {
  std::string id;
  MetricRef metric;
  ModelRef model_a;
  ModelRef model_b;
  Outcome outcome = Outcome::kTie;
  RaterProfile rater;
  std::optional<std::string> stratum;
  bool operator==(const ComparisonRecord&) const = default;
};

// Dense bijection between string identifiers and 0..n-1, ordered
// lexicographically.
class LabelIndex {
 public:
  LabelIndex() = default;
  template <typename Range>
  static LabelIndex from_labels(const Range& labels) {
    std::set<std::string> unique(std::begin(labels), std::end(labels));
    return LabelIndex(std::vector<std::string>(unique.begin(), unique.end()));
  }

  int size() const { return static_cast<int>(labels_.size()); }
  bool empty() const { return labels_.empty(); }
  const std::string& label(int position) const;
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<int> find(std::string_view label) const;
  // Throws kIndexOutOfRange when absent.
  int at(std::string_view label) const;
  bool operator==(const LabelIndex& other) const {
    return labels_ == other.labels_;
  }

 private:
  explicit LabelIndex(std::vector<std::string> sorted_unique);

  std::vector<std::string> labels_;
  std::map<std::string, int, std::less<>> positions_;
};

// Known models and groups. An empty model set accepts any non-empty id.
struct Registry {
  std::array<std::set<std::string, std::less<>>, kNumAxes> groups;
  std::set<std::string, std::less<>> models;

  bool has_group(Axis axis, std::string_view label) const;
  bool has_model(std::string_view id) const;

  // The demographic strata of the UK/US study design.
  static Registry standard();
};

struct Dataset {
  std::vector<ComparisonRecord> records;
  LabelIndex models;
  std::array<LabelIndex, kNumAxes> groups;
  LabelIndex metrics;

  const LabelIndex& group_index(Axis axis) const {
    return groups[axis_slot(axis)];
  }
  std::array<int, kNumAxes> group_counts() const;
};

// Checks record invariants that need no registry: non-empty ids, distinct
// models, no duplicate group within an axis, and country namespaces matching
// the rater's country.
void check_record(const ComparisonRecord& record);

// Full validation against registries. Returns the record unchanged.
ComparisonRecord validate_record(const ComparisonRecord& record,
                                 const Registry& registry);

// Builds dense indices over every model, metric and group referenced by the
// records. `extra_groups` lets callers index groups that are absent from the
// data (for example census groups with no respondents).
Dataset build_index(std::vector<ComparisonRecord> records,
                    std::span<const GroupRef> extra_groups = {});

// Dense weight vector over the axis's groups: 1/m on each of the rater's m
// groups, zero elsewhere, all zero when the axis is unobserved.
Eigen::VectorXd membership_weights(const RaterProfile& rater, Axis axis,
                                   const LabelIndex& group_index);

// Sparse form of membership_weights, sorted by group position.
std::vector<std::pair<int, double>> sparse_membership_weights(
    const RaterProfile& rater, Axis axis, const LabelIndex& group_index);

}  // namespace arena

#endif  // PREF_ARENA_CORE_HPP_
