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

#ifndef PREF_ARENA_ERROR_HPP_
#define PREF_ARENA_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace arena {

enum class ErrorCode {
  kSelfComparison,
  kUnknownGroup,
  kUnknownModel,
  kEmptyId,
  kDuplicateGroup,
  kIndexOutOfRange,
  kNonPositiveNu,
  kDimensionMismatch,
  kNonFiniteGradient,
  kDivergenceFlood,
  kInsufficientDraws,
  kMissingCensus,
  kEmptyDraws,
  kTooFewModels,
  kTooFewGroups,
  kEmptyDataset,
  kUnknownStratum,
  kUnknownTicket,
  kInvalidOutcome,
  kOutOfOrderEvent,
  kEmptyCellPresent,
  kDegenerateTable,
  kParseError,
  kValidationError,
  kMissingField,
  kConfigError,
  kMissingDraws,
  kInvalidArgument,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception type; callers
// switch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace arena

#endif  // PREF_ARENA_ERROR_HPP_
