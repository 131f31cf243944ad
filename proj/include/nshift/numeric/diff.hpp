#pragma once

#include <cmath>
#include <utility>

#include "nshift/types.hpp"

// Finite-difference kernels shared by every module that lacks analytic partials.
// All stencils are central differences with one Richardson extrapolation level,
// giving fourth-order truncation error in the step.

namespace nshift::numeric {

namespace detail {

// Offsets are snapped so that (x0 + h) - x0 is exactly representable.
inline double snapped_step(double x0, double h) {
  volatile double xp = x0 + h;
  return xp - x0;
}

}  // namespace detail

/// d/ds f(s) at s = x0, where f: double -> T (double or Eigen vector/matrix).
template <class Fn>
auto derivative(Fn&& f, double x0, double h) {
  const double h1 = detail::snapped_step(x0, h);
  const double h2 = detail::snapped_step(x0, 0.5 * h);
  auto d1 = ((f(x0 + h1) - f(x0 - h1)) / (2.0 * h1)).eval();
  auto d2 = ((f(x0 + h2) - f(x0 - h2)) / (2.0 * h2)).eval();
  return ((4.0 * d2 - d1) / 3.0).eval();
}

/// Scalar specialisation: avoids the Eigen .eval() calls on plain doubles.
template <class Fn>
double derivative_scalar(Fn&& f, double x0, double h) {
  const double h1 = detail::snapped_step(x0, h);
  const double h2 = detail::snapped_step(x0, 0.5 * h);
  const double d1 = (f(x0 + h1) - f(x0 - h1)) / (2.0 * h1);
  const double d2 = (f(x0 + h2) - f(x0 - h2)) / (2.0 * h2);
  return (4.0 * d2 - d1) / 3.0;
}

/// Gradient of f: R^n -> R.
template <class Fn>
Vector gradient(Fn&& f, const Vector& x, double h) {
  Vector g(x.size());
  Vector y = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    g[k] = derivative_scalar(
        [&](double s) {
          y[k] = s;
          const double value = f(static_cast<const Vector&>(y));
          y[k] = x[k];
          return value;
        },
        x[k], h);
  }
  return g;
}

/// Jacobian of f: R^n -> R^m; column k holds the derivative along input k.
template <class Fn>
Matrix jacobian(Fn&& f, const Vector& x, double h) {
  Matrix jac;
  Vector y = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector column = derivative(
        [&](double s) -> Vector {
          y[k] = s;
          Vector value = f(static_cast<const Vector&>(y));
          y[k] = x[k];
          return value;
        },
        x[k], h);
    if (k == 0) jac.resize(column.size(), x.size());
    jac.col(k) = column;
  }
  return jac;
}

/// Hessian of f: R^n -> R by nesting two gradient stencils. Entry (i, j) is
/// d/dx^j of (df/dx^i). The result is not symmetrised.
template <class Fn>
Matrix hessian(Fn&& f, const Vector& x, double inner_h, double outer_h) {
  return jacobian([&](const Vector& y) { return gradient(f, y, inner_h); }, x, outer_h);
}

}  // namespace nshift::numeric
