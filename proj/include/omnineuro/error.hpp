#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace omnineuro {

enum class ErrorCode {
  MalformedHeader,
  UnsupportedVariant,
  TruncatedData,
  RaggedRows,
  NonNumericCell,
  UnstableDesign,
  InvalidArgument,
  MissingChannel,
  SeriesTooShort,
  DegenerateSeries,
  InsufficientData,
  SingleClassData,
  EmptyInput,
  EmptySession,
  SingularCovariance,
  InsufficientTrials,
  TooFewPairs,
  DegenerateCondition,
  IoFailure,
  SchemaMismatch,
  StreamAborted,
  BindFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedVariant: return "UnsupportedVariant";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::UnstableDesign: return "UnstableDesign";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptySession: return "EmptySession";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::InsufficientTrials: return "InsufficientTrials";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::DegenerateCondition: return "DegenerateCondition";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::StreamAborted: return "StreamAborted";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace omnineuro
