#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mott {

enum class ErrorKind {
  DimensionMismatch,
  InvalidBody,
  EmptyInterior,
  DegenerateGradient,
  DegenerateFacetSet,
  MaxIterations,
  UniquenessViolation,
  NoContactInRange,
  ApproximationMissing,
  CallbackFailure,
  SchemaError,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidBody: return "InvalidBody";
    case ErrorKind::EmptyInterior: return "EmptyInterior";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::DegenerateFacetSet: return "DegenerateFacetSet";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::UniquenessViolation: return "UniquenessViolation";
    case ErrorKind::NoContactInRange: return "NoContactInRange";
    case ErrorKind::ApproximationMissing: return "ApproximationMissing";
    case ErrorKind::CallbackFailure: return "CallbackFailure";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace mott
