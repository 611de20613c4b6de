// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace arglulam {

enum class ErrorCode {
  kOutOfRange,
  kValidationFailed,
  kBadBorder,
  kBadOrientation,
  kBadChecksum,
  kTooFewPoints,
  kDegenerateGeometry,
  kNoObservations,
  kEmptyResult,
  kEmptyField,
  kIdSpaceExhausted,
  kNotFound,
  kUnknownMarker,
  kStorageFailure,
  kIoFailure,
  kParseFailure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kValidationFailed: return "ValidationFailed";
    case ErrorCode::kBadBorder: return "BadBorder";
    case ErrorCode::kBadOrientation: return "BadOrientation";
    case ErrorCode::kBadChecksum: return "BadChecksum";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kNoObservations: return "NoObservations";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kEmptyField: return "EmptyField";
    case ErrorCode::kIdSpaceExhausted: return "IdSpaceExhausted";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnknownMarker: return "UnknownMarker";
    case ErrorCode::kStorageFailure: return "StorageFailure";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kParseFailure: return "ParseFailure";
  }
  return "Unknown";
}

/// Library failure tagged with an ErrorCode.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace arglulam
