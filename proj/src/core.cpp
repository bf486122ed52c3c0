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

#include "pref_arena/core.hpp"

#include <algorithm>

#include "pref_arena/error.hpp"

namespace arena {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSelfComparison: return "SelfComparison";
    case ErrorCode::kUnknownGroup: return "UnknownGroup";
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kEmptyId: return "EmptyId";
    case ErrorCode::kDuplicateGroup: return "DuplicateGroup";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kNonPositiveNu: return "NonPositiveNu";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kDivergenceFlood: return "DivergenceFlood";
    case ErrorCode::kInsufficientDraws: return "InsufficientDraws";
    case ErrorCode::kMissingCensus: return "MissingCensus";
    case ErrorCode::kEmptyDraws: return "EmptyDraws";
    case ErrorCode::kTooFewModels: return "TooFewModels";
    case ErrorCode::kTooFewGroups: return "TooFewGroups";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kUnknownStratum: return "UnknownStratum";
    case ErrorCode::kUnknownTicket: return "UnknownTicket";
    case ErrorCode::kInvalidOutcome: return "InvalidOutcome";
    case ErrorCode::kOutOfOrderEvent: return "OutOfOrderEvent";
    case ErrorCode::kEmptyCellPresent: return "EmptyCellPresent";
    case ErrorCode::kDegenerateTable: return "DegenerateTable";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kMissingDraws: return "MissingDraws";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

std::string_view axis_name(Axis axis) {
  switch (axis) {
    case Axis::kAge: return "age";
    case Axis::kEthnicity: return "ethnicity";
    case Axis::kPolitics: return "politics";
  }
  return "";
}

std::optional<Axis> parse_axis(std::string_view name) {
  for (Axis axis : kAllAxes) {
    if (axis_name(axis) == name) return axis;
  }
  return std::nullopt;
}

std::string_view country_name(Country country) {
  return country == Country::kUS ? "US" : "UK";
}

std::optional<Country> parse_country(std::string_view name) {
  if (name == "US") return Country::kUS;
  if (name == "UK") return Country::kUK;
  return std::nullopt;
}

std::string_view outcome_token(Outcome outcome) {
  switch (outcome) {
    case Outcome::kWinA: return "A";
    case Outcome::kTie: return "tie";
    case Outcome::kWinB: return "B";
  }
  return "";
}

std::optional<Outcome> parse_outcome(std::string_view token) {
  if (token == "A") return Outcome::kWinA;
  if (token == "tie") return Outcome::kTie;
  if (token == "B") return Outcome::kWinB;
  return std::nullopt;
}

std::optional<Country> group_country(std::string_view label) {
  auto colon = label.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  return parse_country(label.substr(0, colon));
}

std::string qualify_group(Country country, Axis axis, std::string_view label) {
  if (axis == Axis::kAge || group_country(label).has_value()) {
    return std::string(label);
  }
  return std::string(country_name(country)) + ":" + std::string(label);
}

std::string unqualify_group(Country country, Axis axis,
                            std::string_view label) {
  if (axis == Axis::kAge) return std::string(label);
  auto owner = group_country(label);
  if (owner && *owner == country) {
    return std::string(label.substr(label.find(':') + 1));
  }
  return std::string(label);
}

LabelIndex::LabelIndex(std::vector<std::string> sorted_unique)
    : labels_(std::move(sorted_unique)) {
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    positions_.emplace(labels_[i], i);
  }
}

const std::string& LabelIndex::label(int position) const {
  if (position < 0 || position >= size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "position " + std::to_string(position) + " outside index of " +
                    std::to_string(size()));
  }
  return labels_[position];
}

std::optional<int> LabelIndex::find(std::string_view label) const {
  auto it = positions_.find(label);
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

int LabelIndex::at(std::string_view label) const {
  auto found = find(label);
  if (!found) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "'" + std::string(label) + "' is not indexed");
  }
  return *found;
}

bool Registry::has_group(Axis axis, std::string_view label) const {
  const auto& set = groups[axis_slot(axis)];
  return set.find(label) != set.end();
}

bool Registry::has_model(std::string_view id) const {
  if (id.empty()) return false;
  return models.empty() || models.find(id) != models.end();
}

Registry Registry::standard() {
  Registry registry;
  auto& age = registry.groups[axis_slot(Axis::kAge)];
  age = {"18-34", "35-54", "55+"};
  auto& ethnicity = registry.groups[axis_slot(Axis::kEthnicity)];
  for (const char* label : {"Hispanic", "Asian", "African American", "White"}) {
    ethnicity.insert(std::string("US:") + label);
  }
  for (const char* label : {"Asian", "Black", "White", "Other"}) {
    ethnicity.insert(std::string("UK:") + label);
  }
  auto& politics = registry.groups[axis_slot(Axis::kPolitics)];
  for (const char* label : {"Democrat", "Republican", "Independent"}) {
    politics.insert(std::string("US:") + label);
  }
  for (const char* label :
       {"Conservative", "Labour", "Liberal Democrats", "Greens", "Reform UK"}) {
    politics.insert(std::string("UK:") + label);
  }
  return registry;
}

std::array<int, kNumAxes> Dataset::group_counts() const {
  return {groups[0].size(), groups[1].size(), groups[2].size()};
}

void check_record(const ComparisonRecord& record) {
  if (record.id.empty()) throw Error(ErrorCode::kEmptyId, "record id is empty");
  if (record.metric.empty()) {
    throw Error(ErrorCode::kEmptyId, "record " + record.id + ": empty metric");
  }
  if (record.model_a.empty() || record.model_b.empty()) {
    throw Error(ErrorCode::kEmptyId, "record " + record.id + ": empty model id");
  }
  if (record.model_a == record.model_b) {
    throw Error(ErrorCode::kSelfComparison,
                "record " + record.id + " compares " + record.model_a +
                    " with itself");
  }
  for (Axis axis : kAllAxes) {
    const auto& labels = record.rater.groups(axis);
    std::set<std::string_view> seen;
    for (const auto& label : labels) {
      if (label.empty()) {
        throw Error(ErrorCode::kEmptyId, "record " + record.id +
                                             ": empty group label on " +
                                             std::string(axis_name(axis)));
      }
      if (!seen.insert(label).second) {
        throw Error(ErrorCode::kDuplicateGroup,
                    "record " + record.id + ": group " + label +
                        " listed twice on " + std::string(axis_name(axis)));
      }
      auto owner = group_country(label);
      if (axis == Axis::kAge && owner) {
        throw Error(ErrorCode::kUnknownGroup,
                    "record " + record.id + ": " + label +
                        " is not an age group");
      }
      if (axis != Axis::kAge && owner && *owner != record.rater.country) {
        throw Error(ErrorCode::kUnknownGroup,
                    "record " + record.id + ": group " + label +
                        " belongs to another country");
      }
    }
  }
}

ComparisonRecord validate_record(const ComparisonRecord& record,
                                 const Registry& registry) {
  check_record(record);
  for (const auto* model : {&record.model_a, &record.model_b}) {
    if (!registry.has_model(*model)) {
      throw Error(ErrorCode::kUnknownModel,
                  "record " + record.id + ": unknown model " + *model);
    }
  }
  for (Axis axis : kAllAxes) {
    for (const auto& label : record.rater.groups(axis)) {
      if (!registry.has_group(axis, label)) {
        throw Error(ErrorCode::kUnknownGroup,
                    "record " + record.id + ": " + label +
                        " is not a group on the " +
                        std::string(axis_name(axis)) + " axis");
      }
    }
  }
  return record;
}

Dataset build_index(std::vector<ComparisonRecord> records,
                    std::span<const GroupRef> extra_groups) {
  std::set<std::string> models;
  std::set<std::string> metrics;
  std::array<std::set<std::string>, kNumAxes> groups;
  for (const auto& record : records) {
    check_record(record);
    models.insert(record.model_a);
    models.insert(record.model_b);
    metrics.insert(record.metric);
    for (Axis axis : kAllAxes) {
      for (const auto& label : record.rater.groups(axis)) {
        groups[axis_slot(axis)].insert(label);
      }
    }
  }
  for (const auto& group : extra_groups) {
    groups[axis_slot(group.axis)].insert(group.label);
  }
  Dataset dataset;
  dataset.records = std::move(records);
  dataset.models = LabelIndex::from_labels(models);
  dataset.metrics = LabelIndex::from_labels(metrics);
  for (int slot = 0; slot < kNumAxes; ++slot) {
    dataset.groups[slot] = LabelIndex::from_labels(groups[slot]);
  }
  return dataset;
}

std::vector<std::pair<int, double>> sparse_membership_weights(
    const RaterProfile& rater, Axis axis, const LabelIndex& group_index) {
  const auto& labels = rater.groups(axis);
  std::vector<std::pair<int, double>> weights;
  if (labels.empty()) return weights;
  const double share = 1.0 / static_cast<double>(labels.size());
  weights.reserve(labels.size());
  for (const auto& label : labels) {
    auto position = group_index.find(label);
    if (!position) {
      throw Error(ErrorCode::kUnknownGroup,
                  label + " is not indexed on the " +
                      std::string(axis_name(axis)) + " axis");
    }
    weights.emplace_back(*position, share);
  }
  std::sort(weights.begin(), weights.end());
  return weights;
}

Eigen::VectorXd membership_weights(const RaterProfile& rater, Axis axis,
                                   const LabelIndex& group_index) {
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(group_index.size());
  for (const auto& [position, weight] :
       sparse_membership_weights(rater, axis, group_index)) {
    dense[position] = weight;
  }
  return dense;
}

}  // namespace arena
