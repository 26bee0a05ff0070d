#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace idealflow {

enum class ErrorCode {
  InvalidArgument,
  DuplicateArc,
  MissingArc,
  NotStronglyConnected,
  AugmentationFailed,
  DanglingNode,
  NotIrreducible,
  SolverFailure,
  DimensionMismatch,
  EmptyFlow,
  NonPositiveScale,
  NotSquare,
  DegenerateNullSpace,
  NonPositiveEntry,
  ConservationViolated,
  NoConvergence,
  ZeroUnitFlow,
  ParseError,
  MetadataMismatch,
  UnknownArc,
  SchemaError,
  EditRejected,
  EmptyHistory,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DuplicateArc: return "DuplicateArc";
    case ErrorCode::MissingArc: return "MissingArc";
    case ErrorCode::NotStronglyConnected: return "NotStronglyConnected";
    case ErrorCode::AugmentationFailed: return "AugmentationFailed";
    case ErrorCode::DanglingNode: return "DanglingNode";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyFlow: return "EmptyFlow";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::DegenerateNullSpace: return "DegenerateNullSpace";
    case ErrorCode::NonPositiveEntry: return "NonPositiveEntry";
    case ErrorCode::ConservationViolated: return "ConservationViolated";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ZeroUnitFlow: return "ZeroUnitFlow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MetadataMismatch: return "MetadataMismatch";
    case ErrorCode::UnknownArc: return "UnknownArc";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::EditRejected: return "EditRejected";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
  }
  return "Unknown";
}

/// Numerical failures (as opposed to bad input). The CLI maps these to exit 3.
constexpr bool is_numeric_failure(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SolverFailure:
    case ErrorCode::DegenerateNullSpace:
    case ErrorCode::ConservationViolated:
    case ErrorCode::NoConvergence:
      return true;
    default:
      return false;
  }
}

/// Single exception type for the library. `detail()` carries a location when
/// one exists: a 1-based line for parse errors, a JSON path for schema errors,
/// a node index for dangling nodes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace idealflow
