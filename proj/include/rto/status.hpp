// Copyright 2026 The RTO Authors
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rto {

// Every failure the library reports carries one of these codes. The CLI maps
// each code to its own process exit status.
enum class ErrorCode {
  kInvalidParameter,
  kIo,
  kParse,
  kValidation,
  kEmptyDataset,
  kEmptyGroup,
  kMissingField,
  kUnknownGroup,
  kMismatch,
  kVersion,
  kSerialization,
  kDegenerateConstraint,
  kDegenerateStatistics,
  kUnsupportedCriterion,
  kDisjointness,
  kData,
  kInternal,
};

inline constexpr std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kValidation: return "validation-error";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kEmptyGroup: return "empty-group";
    case ErrorCode::kMissingField: return "missing-field";
    case ErrorCode::kUnknownGroup: return "unknown-group";
    case ErrorCode::kMismatch: return "mismatch";
    case ErrorCode::kVersion: return "version-error";
    case ErrorCode::kSerialization: return "serialization-error";
    case ErrorCode::kDegenerateConstraint: return "degenerate-constraint";
    case ErrorCode::kDegenerateStatistics: return "degenerate-statistics";
    case ErrorCode::kUnsupportedCriterion: return "unsupported-criterion";
    case ErrorCode::kDisjointness: return "disjointness-error";
    case ErrorCode::kData: return "data-error";
    case ErrorCode::kInternal: return "internal-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace rto
