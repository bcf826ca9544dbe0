#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mesopt {

enum class ErrorCode {
  DuplicateName,
  InvalidBounds,
  UnknownVariable,
  NumericalBreakdown,
  NodeLimitExceeded,
  InvalidSpec,
  MissingCapacity,
  MissingProfile,
  HorizonMismatch,
  InvalidTopology,
  MissingCostParameter,
  UnknownQuantity,
  InvalidArgument,
  Infeasible,
  Unbounded,
  FrozenCapacityMissing,
  IndivisibleLength,
  KTooLarge,
  ParseError,
  SchemaError,
  MissingFile,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

/// Single exception type for the library. The message carries the entity
/// (variable, component, config path) that caused the failure; outer layers
/// prepend their own context with `with_context`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Returns a copy whose message is prefixed with "context: ".
  Error with_context(std::string_view context) const {
    return Error(code_, std::string(context) + ": " + what());
  }

 private:
  ErrorCode code_;
};

}  // namespace mesopt
