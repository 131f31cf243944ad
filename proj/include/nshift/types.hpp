#pragma once

#include <Eigen/Dense>

namespace nshift {

/// Chart coordinates x^1..x^n.
using Coords = Eigen::VectorXd;
/// Contravariant velocity components v^1..v^n.
using Velocity = Eigen::VectorXd;
/// Components of a covector (lower index).
using Covector = Eigen::VectorXd;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Speeds at or below this value are treated as the excluded zero section v = 0.
inline constexpr double kDefaultSpeedFloor = 1e-12;

}  // namespace nshift
