#pragma once

#include <stdexcept>
#include <string>

namespace agrisk {

enum class Errc {
  InvalidArgument,
  Io,
  MalformedFile,
  DuplicateKey,
  InsufficientYears,
  AllCountriesRemoved,
  EmptyIntersection,
  MissingRegressor,
  DimensionMismatch,
  NonPositiveVariance,
  UnnormalizedWeights,
  AllWeightsZero,
  MismatchedData,
  MissingClimateForTarget,
  MissingLevel,
  HorizonExceedsTrajectory,
  SingleClimateModel,
  ZeroBaseline,
};

const char* to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc codes so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace agrisk
