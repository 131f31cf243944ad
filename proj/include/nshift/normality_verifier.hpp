#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nshift/force_builder.hpp"
#include "nshift/tensor_core.hpp"

namespace nshift {

/// Step controls for the derivatives the residuals need. `outer_step` is used
/// when differentiating derived quantities (F, A, a, b) whose own evaluation may
/// already involve a finite-difference stencil.
struct DerivativeOptions {
  double outer_step = 3.1622776601683795e-3;  // sqrt(1e-5)
  double speed_floor = kDefaultSpeedFloor;
};

/// Force value and both first-order gradients at one phase-space point.
struct ForceJet {
  Coords x;
  Velocity v;
  Projector proj;
  Matrix g;
  Matrix ginv;
  Christoffel gamma;
  Covector F;
  Vector F_up;
  Matrix dF_dx;   ///< (j, m) = dF_j / dx^m
  Matrix vgrad;   ///< (m, j) = tilde-nabla_m F_j = dF_j / dv^m
  Matrix nabla;   ///< (i, j) = nabla_i F_j (covariant spatial gradient)

  /// 1 + |F|_inf + max(|nabla F|_inf, |tilde-nabla F|_inf).
  double scale() const;
};

ForceJet force_jet(const ForceField& F, const MetricField& m, const Coords& x, const Velocity& v,
                   const DerivativeOptions& opts = {});

// Raw residuals of the normality equations. Matrix-valued residuals are indexed
// (epsilon, sigma) with epsilon the row.

Vector residual_weak1(const ForceField& F, const MetricField& m, const Coords& x,
                      const Velocity& v, const DerivativeOptions& opts = {});
Vector residual_weak2(const ForceField& F, const MetricField& m, const Coords& x,
                      const Velocity& v, const DerivativeOptions& opts = {});
Matrix residual_additional1(const ForceField& F, const MetricField& m, const Coords& x,
                            const Velocity& v, const DerivativeOptions& opts = {});
Matrix residual_additional2(const ForceField& F, const MetricField& m, const Coords& x,
                            const Velocity& v, const DerivativeOptions& opts = {});

// Jet-based variants used by verify() to share one set of derivatives.
Vector residual_weak2(const ForceJet& jet);
Matrix residual_additional1(const ForceJet& jet);
Matrix residual_additional2(const ForceJet& jet);

struct Eq124Result {
  Matrix residual;
  double lambda = 0;
  double scale = 1;  ///< 1 + |A| + |velocity Hessian|_inf
};

/// P^r_sigma (d^2A/dv^r dv^s) P^{s eps} - lambda P^eps_sigma with
/// lambda = P^{rs} d^2A/dv^r dv^s / (n - 1).
Eq124Result residual_eq124(const ExtendedScalar& A, const MetricField& m, const Coords& x,
                           const Velocity& v, const DerivativeOptions& opts = {});

struct AnsatzLevelResult {
  Vector eq121;  ///< second weak equation rewritten for A
  Matrix eq122;  ///< first additional equation rewritten for A
  double scale = 1;
};

/// Ansatz-level forms of the second weak and first additional equations.
AnsatzLevelResult residual_ansatz_level(const ExtendedScalar& A, const MetricField& m,
                                        const Coords& x, const Velocity& v,
                                        const DerivativeOptions& opts = {});

struct ReducedResult {
  Matrix b_residual;   ///< omega_rs, exactly antisymmetric
  Vector a_residual;   ///< (d_s + b_s d_v) a - a d_v b_s
  double scale = 1;
};

/// Reduced equations in coordinate form:
/// omega_rs = (d_r + b_r d_v) b_s - (d_s + b_s d_v) b_r.
ReducedResult residual_reduced(const AnsatzField& af, const MetricField& m, const Coords& x,
                               double speed, const DerivativeOptions& opts = {});

/// Sample set: quasi-random points in a coordinate box with speeds in a range.
struct SampleSpec {
  int count = 200;
  Vector box_lo;
  Vector box_hi;
  double speed_lo = 0.5;
  double speed_hi = 2.0;
  std::uint64_t seed = 1;
};

struct PhaseSample {
  Coords x;
  Velocity v;
};

/// Scrambled Halton points; directions are uniform on the unit sphere of the
/// metric at each x.
std::vector<PhaseSample> generate_samples(const MetricField& m, const SampleSpec& spec);

struct NormalityReport {
  double r_weak1 = 0;
  double r_weak2 = 0;
  double r_add1 = 0;
  double r_add2 = 0;
  double r_eq124 = 0;
  double r_eq121 = 0;
  double r_eq122 = 0;
  double r_reduced_b = 0;
  double r_reduced_a = 0;
  bool has_reduced = false;
  std::vector<double> lambda_samples;
  int sample_count = 0;
  double tolerance_used = 0;
  double ansatz_tolerance_used = 0;  ///< applies to r_eq124, r_eq121, r_eq122
  bool pass = false;

  /// Residual families as (name, value) in a fixed order; reduced entries only
  /// when they were evaluated.
  std::vector<std::pair<std::string, double>> families() const;
  std::vector<std::string> failing() const;
  double max_residual() const;
};

struct VerifyOptions {
  double tolerance = 1e-8;
  /// Tolerance for the families built from second velocity derivatives of A.
  /// Those nest one more stencil than the force-level equations; zero means
  /// "same as tolerance".
  double ansatz_tolerance = 0.0;
  DerivativeOptions derivatives;
  /// Velocity-Hessian outer step multiplier.
  double hessian_scale = 1.0;
};

/// Residuals for a user force field. The scalar A = N^j F_j feeds the
/// ansatz-level checks; the reduced equations are not evaluated.
NormalityReport verify(const ForceField& F, const MetricField& m, const SampleSpec& samples,
                       const VerifyOptions& opts = {});

/// Residuals for the field generated by (W, h), including the reduced equations
/// for a and b.
NormalityReport verify(const GeneratingScalar& gs, const MetricField& m,
                       const SampleSpec& samples, const VerifyOptions& opts = {});

}  // namespace nshift
