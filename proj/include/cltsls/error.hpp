#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cltsls {

enum class ErrorCode {
  // input validation
  MixedAssignmentWithinCluster,
  EmptyArm,
  TooFewClusters,
  NonBinaryTreatment,
  NonBinaryOutcomeForBinaryKind,
  InconsistentCovariates,
  NonFiniteValue,
  MissingClusterCovariate,
  NoCovariatesSelected,
  InvalidOptions,
  InvalidConfig,
  SchemaMismatch,
  NonConstantClusterCovariate,
  ParseError,
  IoError,
  // numerical failures
  RankDeficient,
  NonPositiveWeight,
  InsufficientObservations,
  DfNonPositive,
  ZeroDenominator,
  WeakDenominator,
  SeparationDetected,
  NonConvergence,
  BracketFailure,
  IccUnavailable,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes caused by malformed input rather than numerical trouble.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace cltsls
