#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sipi {

enum class ErrorCode {
  ConstantColumn,
  NonFinite,
  RankDeficient,
  DimensionMismatch,
  NoConvergence,
  SingularGram,
  EmptyActiveSet,
  TieDetected,
  NoLambdaInRange,
  SplitTooSmall,
  AcceptanceTooLow,
  InfeasibleStart,
  DegenerateChord,
  EmptyArc,
  EmptyTruncation,
  NonMember,
  EmptySet,
  NonIntegerTrace,
  ZeroMass,
  SingularReconstruction,
  FitterFailure,
  FoldTooSmall,
  InvalidArgument,
  ParseError,
  ConfigError,
  TooManyFailures,
};

// Coarse grouping used for CLI exit codes.
enum class ErrorCategory { Internal, Data, Config };

std::string_view error_name(ErrorCode code);
ErrorCategory error_category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return error_category(code_); }

 private:
  ErrorCode code_;
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::EmptyActiveSet: return "EmptyActiveSet";
    case ErrorCode::TieDetected: return "TieDetected";
    case ErrorCode::NoLambdaInRange: return "NoLambdaInRange";
    case ErrorCode::SplitTooSmall: return "SplitTooSmall";
    case ErrorCode::AcceptanceTooLow: return "AcceptanceTooLow";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::DegenerateChord: return "DegenerateChord";
    case ErrorCode::EmptyArc: return "EmptyArc";
    case ErrorCode::EmptyTruncation: return "EmptyTruncation";
    case ErrorCode::NonMember: return "NonMember";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NonIntegerTrace: return "NonIntegerTrace";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::SingularReconstruction: return "SingularReconstruction";
    case ErrorCode::FitterFailure: return "FitterFailure";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
  }
  return "Unknown";
}

inline ErrorCategory error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConstantColumn:
    case ErrorCode::NonFinite:
    case ErrorCode::RankDeficient:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::SingularGram:
    case ErrorCode::EmptyActiveSet:
    case ErrorCode::TieDetected:
    case ErrorCode::NoLambdaInRange:
    case ErrorCode::SplitTooSmall:
    case ErrorCode::FoldTooSmall:
    case ErrorCode::NonMember:
    case ErrorCode::ParseError:
      return ErrorCategory::Data;
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
      return ErrorCategory::Config;
    default:
      return ErrorCategory::Internal;
  }
}

}  // namespace sipi
