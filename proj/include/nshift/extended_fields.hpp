#pragma once

#include <functional>

#include "nshift/tensor_core.hpp"
#include "nshift/types.hpp"

namespace nshift {

/// Scalar field on the tangent bundle, phi(x, v).
struct ExtendedScalar {
  std::function<double(const Coords&, const Velocity&)> eval;
  std::function<Covector(const Coords&, const Velocity&)> dx;  ///< optional d phi / d x^m
  std::function<Covector(const Coords&, const Velocity&)> dv;  ///< optional d phi / d v^m
  double fd_step = 1e-5;

  double operator()(const Coords& x, const Velocity& v) const;
  Covector partial_x(const Coords& x, const Velocity& v) const;
  Covector partial_v(const Coords& x, const Velocity& v) const;
};

/// Scalar field depending on the velocity only through its modulus. The speed
/// is an explicit argument, so isotropy holds by construction.
struct IsotropicScalar {
  std::function<double(const Coords&, double)> eval;
  std::function<Covector(const Coords&, double)> dx;  ///< optional d/dx^k at fixed speed
  std::function<double(const Coords&, double)> dspeed;  ///< optional d/dv
  double fd_step = 1e-5;

  double operator()(const Coords& x, double speed) const;
  Covector partial_x(const Coords& x, double speed) const;
  double partial_speed(const Coords& x, double speed) const;

  bool has_analytic_partials() const noexcept {
    return static_cast<bool>(dx) && static_cast<bool>(dspeed);
  }

  /// View as an extended scalar through v -> |v| in metric `m`. No analytic
  /// partials are attached, so the lifted field exercises the general rules.
  ExtendedScalar lift(const MetricField& m) const;
};

/// Scalar field on the base manifold, f(x).
struct PositionScalar {
  std::function<double(const Coords&)> eval;
  std::function<Vector(const Coords&)> grad;  ///< optional
  double fd_step = 1e-5;

  double operator()(const Coords& x) const { return eval(x); }
  Vector gradient(const Coords& x) const;
};

/// Velocity gradient: d phi / d v^m.
Covector velocity_gradient(const ExtendedScalar& phi, const MetricField& m, const Coords& x,
                           const Velocity& v);

/// Spatial gradient: d phi/dx^m - Gamma^k_mj v^j d phi/dv^k.
Covector spatial_gradient(const ExtendedScalar& phi, const MetricField& m, const Coords& x,
                          const Velocity& v);

/// Spatial gradient of a field depending only on |v|: the connection terms cancel
/// and it reduces to the coordinate partial at fixed speed.
Covector spatial_gradient_isotropic(const IsotropicScalar& w, const MetricField& m,
                                    const Coords& x, double speed);

/// Velocity Hessian d^2 phi / dv^r dv^s computed by nesting velocity gradients.
/// Inner step is phi.fd_step; outer step is sqrt(phi.fd_step) * outer_scale.
Matrix velocity_hessian(const ExtendedScalar& phi, const MetricField& m, const Coords& x,
                        const Velocity& v, double outer_scale = 1.0);

/// Mixed derivative: entry (r, s) is nabla_r of (d phi / dv^s), i.e. the spatial
/// gradient applied to the covector field d phi / dv. A velocity Hessian computed
/// with the same outer_scale may be passed in to skip recomputing it.
Matrix mixed_gradient(const ExtendedScalar& phi, const MetricField& m, const Coords& x,
                      const Velocity& v, double outer_scale = 1.0,
                      const Matrix* velocity_hessian = nullptr);

}  // namespace nshift
