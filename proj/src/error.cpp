#include "nshift/error.hpp"

namespace nshift {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::AsymmetricMetric: return "AsymmetricMetric";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::ZeroVelocity: return "ZeroVelocity";
    case ErrorCode::EvaluationFailure: return "EvaluationFailure";
    case ErrorCode::DegenerateWv: return "DegenerateWv";
    case ErrorCode::NonMonotoneGauge: return "NonMonotoneGauge";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::DegenerateTangents: return "DegenerateTangents";
    case ErrorCode::RootNotBracketed: return "RootNotBracketed";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TrajectoryEscaped: return "TrajectoryEscaped";
  }
  return "Unknown";
}

}  // namespace nshift
