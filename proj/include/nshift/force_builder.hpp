#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nshift/extended_fields.hpp"
#include "nshift/tensor_core.hpp"

namespace nshift {

using ScalarFn = std::function<double(double)>;

/// The pair (W, h) that parametrises every force field admitting the normal
/// shift in dimension n >= 3. W must satisfy |dW/dv| >= wv_floor wherever it is
/// evaluated.
struct GeneratingScalar {
  IsotropicScalar W;
  ScalarFn h;
  double wv_floor = 1e-8;
  std::string name;

  /// dW/dv at (x, speed); throws DegenerateWv below the floor.
  double checked_wv(const Coords& x, double speed) const;
};

/// Fields a(x, |v|) and b_i(x, |v|) of the scalar ansatz A = a + b_i v^i.
struct AnsatzField {
  IsotropicScalar a;
  std::vector<IsotropicScalar> b;
  /// Optional evaluation of all b_i at once; used in place of the per-component
  /// closures when the components share work.
  std::function<Covector(const Coords&, double)> b_all;

  Covector b_at(const Coords& x, double speed) const;
};

enum class ForceOrigin { GeneratedFromW, Ansatz, User };

std::string_view to_string(ForceOrigin origin) noexcept;

/// Covector force field F_k(x, v).
struct ForceField {
  std::function<Covector(const MetricField&, const Coords&, const Velocity&)> eval;
  ForceOrigin label = ForceOrigin::User;

  Covector operator()(const MetricField& m, const Coords& x, const Velocity& v) const;
};

/// b_k = -(dW/dx^k) / (dW/dv).
Covector compute_b(const GeneratingScalar& gs, const MetricField& m, const Coords& x,
                   double speed);

/// a = h(W) / (dW/dv).
double compute_a(const GeneratingScalar& gs, const MetricField& m, const Coords& x,
                 double speed);

/// a and b wrapped as isotropic scalars. The wrappers carry no analytic
/// partials; their derivatives are taken by finite differences.
AnsatzField ansatz_from_generator(const GeneratingScalar& gs, const MetricField& m);

/// A = a(x, |v|) + sum_i b_i(x, |v|) v^i.
double ansatz_A(const AnsatzField& af, const MetricField& m, const Coords& x, const Velocity& v,
                double speed_floor = kDefaultSpeedFloor);

/// The ansatz scalar as an extended field.
ExtendedScalar ansatz_scalar(const AnsatzField& af, const MetricField& m,
                             double speed_floor = kDefaultSpeedFloor);

/// Scalar ansatz: F_k = A N_k - |v| sum_i (dA/dv^i) P^i_k.
Covector force_from_A(const ExtendedScalar& A, const MetricField& m, const Coords& x,
                      const Velocity& v, double speed_floor = kDefaultSpeedFloor);

/// F_k = a N_k + |v| sum_i b_i (2 N^i N_k - delta^i_k).
Covector force_from_ab(const AnsatzField& af, const MetricField& m, const Coords& x,
                       const Velocity& v, double speed_floor = kDefaultSpeedFloor);

/// General normal-shift force:
/// F_k = h(W) N_k / W_v - |v| sum_i (nabla_i W / W_v)(2 N^i N_k - delta^i_k).
Covector force_from_W(const GeneratingScalar& gs, const MetricField& m, const Coords& x,
                      const Velocity& v, double speed_floor = kDefaultSpeedFloor);

ForceField make_force_field(GeneratingScalar gs, double speed_floor = kDefaultSpeedFloor);
ForceField make_ansatz_force(ExtendedScalar A, double speed_floor = kDefaultSpeedFloor);

/// Strictly monotone reparametrisation w -> rho(w) with its inverse and derivative.
struct GaugeMap {
  ScalarFn rho;
  ScalarFn rho_inv;
  ScalarFn rho_prime;
  double probe_lo = -1.0;  ///< interval where monotonicity is checked at construction
  double probe_hi = 1.0;
  int probe_count = 65;
};

/// (W, h) -> (rho o W, h(rho^-1(w)) rho'(rho^-1(w))). The induced force field is unchanged.
GeneratingScalar gauge_transform(const GeneratingScalar& gs, const GaugeMap& gauge);

/// W = v, h = 0: geodesic flow, F = 0.
GeneratingScalar builtin_geodesic();

/// W = v exp(-f), h = H: metrizable by the conformal metric exp(-2f) g.
GeneratingScalar builtin_metrizable(PositionScalar f, ScalarFn H);

/// Speed interval on which the non-metrizable quadrature is tabulated.
struct QuadratureCache {
  double speed_lo = 1e-2;
  double speed_hi = 1e2;
  int nodes = 161;
};

/// W = exp(int_1^v s ds / A(s) - f), h = 0. The integral is tabulated on the
/// cache grid at construction; A must not vanish on that interval.
GeneratingScalar builtin_nonmetrizable(PositionScalar f, ScalarFn A,
                                       QuadratureCache cache = {});

/// Same generator with every analytic partial stripped, forcing the
/// finite-difference paths downstream.
GeneratingScalar without_analytic_partials(GeneratingScalar gs);

}  // namespace nshift
