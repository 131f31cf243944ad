#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nshift {

enum class ErrorCode {
  NotPositiveDefinite,
  AsymmetricMetric,
  DimensionMismatch,
  DimensionTooSmall,
  ZeroVelocity,
  EvaluationFailure,
  DegenerateWv,
  NonMonotoneGauge,
  QuadratureFailure,
  DegenerateTangents,
  RootNotBracketed,
  GridTooCoarse,
  NonFinite,
  TrajectoryEscaped,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable error kind alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nshift
