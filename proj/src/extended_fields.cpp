#include "nshift/extended_fields.hpp"

#include <cmath>

#include "nshift/error.hpp"
#include "nshift/numeric/diff.hpp"

namespace nshift {

namespace {

double checked(double value, const char* what) {
  if (!std::isfinite(value)) throw Error(ErrorCode::EvaluationFailure, what);
  return value;
}

Covector checked(Covector value, const char* what) {
  if (!value.allFinite()) throw Error(ErrorCode::EvaluationFailure, what);
  return value;
}

}  // namespace

double ExtendedScalar::operator()(const Coords& x, const Velocity& v) const {
  return checked(eval(x, v), "extended scalar is not finite");
}

Covector ExtendedScalar::partial_x(const Coords& x, const Velocity& v) const {
  if (dx) return checked(dx(x, v), "analytic x-partials are not finite");
  return checked(numeric::gradient([&](const Coords& y) { return (*this)(y, v); }, x, fd_step),
                 "x-partials are not finite");
}

Covector ExtendedScalar::partial_v(const Coords& x, const Velocity& v) const {
  if (dv) return checked(dv(x, v), "analytic v-partials are not finite");
  return checked(numeric::gradient([&](const Velocity& w) { return (*this)(x, w); }, v, fd_step),
                 "v-partials are not finite");
}

double IsotropicScalar::operator()(const Coords& x, double speed) const {
  return checked(eval(x, speed), "isotropic scalar is not finite");
}

Covector IsotropicScalar::partial_x(const Coords& x, double speed) const {
  if (dx) return checked(dx(x, speed), "analytic x-partials are not finite");
  return checked(
      numeric::gradient([&](const Coords& y) { return (*this)(y, speed); }, x, fd_step),
      "x-partials are not finite");
}

double IsotropicScalar::partial_speed(const Coords& x, double speed) const {
  if (dspeed) return checked(dspeed(x, speed), "analytic speed partial is not finite");
  return checked(
      numeric::derivative_scalar([&](double s) { return (*this)(x, s); }, speed, fd_step),
      "speed partial is not finite");
}

ExtendedScalar IsotropicScalar::lift(const MetricField& m) const {
  ExtendedScalar phi;
  phi.fd_step = fd_step;
  phi.eval = [self = *this, m](const Coords& x, const Velocity& v) {
    return self(x, speed_of(m, x, v));
  };
  return phi;
}

Vector PositionScalar::gradient(const Coords& x) const {
  if (grad) return grad(x);
  return numeric::gradient([this](const Coords& y) { return eval(y); }, x, fd_step);
}

Covector velocity_gradient(const ExtendedScalar& phi, const MetricField&, const Coords& x,
                           const Velocity& v) {
  return phi.partial_v(x, v);
}

Covector spatial_gradient(const ExtendedScalar& phi, const MetricField& m, const Coords& x,
                          const Velocity& v) {
  const Christoffel gamma = christoffel_at(m, x);
  const Covector dphi_dv = phi.partial_v(x, v);
  Covector grad = phi.partial_x(x, v);
  for (int mm = 0; mm < m.dim; ++mm) {
    // sum_k (sum_j Gamma^k_{mj} v^j) dphi/dv^k
    double transport = 0.0;
    for (int k = 0; k < m.dim; ++k) transport += gamma.gamma[k].row(mm).dot(v) * dphi_dv[k];
    grad[mm] -= transport;
  }
  return grad;
}

Covector spatial_gradient_isotropic(const IsotropicScalar& w, const MetricField&,
                                    const Coords& x, double speed) {
  if (!(speed > 0.0)) throw Error(ErrorCode::ZeroVelocity, "speed must be positive");
  return w.partial_x(x, speed);
}

Matrix velocity_hessian(const ExtendedScalar& phi, const MetricField&, const Coords& x,
                        const Velocity& v, double outer_scale) {
  const double outer = std::sqrt(phi.fd_step) * outer_scale;
  // Column s of the Jacobian holds d/dv^s of the gradient, so entry (r, s) is
  // d^2 phi / dv^r dv^s.
  return numeric::jacobian([&](const Velocity& w) { return phi.partial_v(x, w); }, v, outer);
}

Matrix mixed_gradient(const ExtendedScalar& phi, const MetricField& m, const Coords& x,
                      const Velocity& v, double outer_scale, const Matrix* hessian) {
  const double outer = std::sqrt(phi.fd_step) * outer_scale;
  const int n = m.dim;
  const Christoffel gamma = christoffel_at(m, x);
  const Covector omega = phi.partial_v(x, v);
  // d omega_s / d x^r in column r, d omega_s / d v^b in column b.
  const Matrix d_dx =
      numeric::jacobian([&](const Coords& y) { return phi.partial_v(y, v); }, x, outer);
  const Matrix d_dv = hessian != nullptr ? *hessian
                                          : velocity_hessian(phi, m, x, v, outer_scale);

  Matrix out(n, n);
  for (int r = 0; r < n; ++r) {
    // Gamma^b_{ra} v^a for every b.
    Vector transport(n);
    for (int b = 0; b < n; ++b) transport[b] = gamma.gamma[b].row(r).dot(v);
    for (int s = 0; s < n; ++s) {
      double value = d_dx(s, r) - d_dv.row(s).dot(transport);
      for (int b = 0; b < n; ++b) value -= gamma.gamma[b](r, s) * omega[b];
      out(r, s) = value;
    }
  }
  return out;
}

}  // namespace nshift
