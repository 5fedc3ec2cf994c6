#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jitwin {

enum class ErrorCode {
  kSumMismatch,
  kDimensionMismatch,
  kParseError,
  kSchemaError,
  kProviderError,
  kSpecError,
  kNonContiguousFrame,
  kMissingCapability,
  kProviderUnreachable,
  kPlanInvalid,
  kSyntaxError,
  kArityError,
  kUnknownPredicate,
  kSemanticProviderError,
  kUnknownTrackId,
  kLengthMismatch,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSumMismatch: return "SumMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kProviderError: return "ProviderError";
    case ErrorCode::kSpecError: return "SpecError";
    case ErrorCode::kNonContiguousFrame: return "NonContiguousFrame";
    case ErrorCode::kMissingCapability: return "MissingCapability";
    case ErrorCode::kProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::kPlanInvalid: return "PlanInvalid";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kArityError: return "ArityError";
    case ErrorCode::kUnknownPredicate: return "UnknownPredicate";
    case ErrorCode::kSemanticProviderError: return "SemanticProviderError";
    case ErrorCode::kUnknownTrackId: return "UnknownTrackId";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure
/// class and `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace jitwin
