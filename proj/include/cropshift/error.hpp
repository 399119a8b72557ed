#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cropshift {

enum class ErrorCode {
  // features
  DivisionByZero,
  InsufficientObservations,
  RankDeficient,
  // classify
  EmptyClass,
  SingularCovariance,
  InvalidParams,
  DimensionMismatch,
  InsufficientData,
  UnlabeledData,
  // shift
  ZeroTrainPrior,
  ClassMismatch,
  AllZeroScores,
  ZeroMeanFieldArea,
  AllZeroAreas,
  InvalidPriors,
  // baselines
  SmoteInfeasible,
  // eval
  LengthMismatch,
  UnknownLabel,
  EmptyMatrix,
  TrainRegionMissingClass,
  MissingPriors,
  TooFewGroups,
  UnknownRegion,
  // synth
  InvalidSpec,
  // io
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-readable kind and `what()` carries context (pixel, band, region).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the error-kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace cropshift
