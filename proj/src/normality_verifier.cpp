#include "nshift/normality_verifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <boost/math/special_functions/erf.hpp>

#include "nshift/error.hpp"
#include "nshift/numeric/diff.hpp"
#include "nshift/parallel.hpp"

namespace nshift {

namespace {

double sup(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
double sup(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void require_dim3(const MetricField& m) {
  if (m.dim < 3) {
    throw Error(ErrorCode::DimensionTooSmall,
                "additional normality equations need n >= 3, got " + std::to_string(m.dim));
  }
}

// sum_i w_i P^i_k = w_k - (w . N^) N_k
Vector project_covector(const Projector& p, const Vector& w) {
  return w - w.dot(p.N_up) * p.N_down;
}

// P^{rs} = g^{rs} - N^r N^s
Matrix projector_up(const Projector& p, const Matrix& ginv) {
  return ginv - p.N_up * p.N_up.transpose();
}

}  // namespace

double ForceJet::scale() const {
  return 1.0 + sup(F) + std::max(sup(nabla), sup(vgrad));
}

ForceJet force_jet(const ForceField& F, const MetricField& m, const Coords& x, const Velocity& v,
                   const DerivativeOptions& opts) {
  ForceJet jet;
  jet.x = x;
  jet.v = v;
  jet.proj = unit_direction(m, x, v, opts.speed_floor);
  jet.g = metric_at(m, x);
  jet.ginv = inverse_metric_at(m, x);
  jet.gamma = christoffel_at(m, x);
  jet.F = F(m, x, v);
  jet.F_up = jet.ginv * jet.F;
  jet.dF_dx = numeric::jacobian([&](const Coords& y) { return F(m, y, v); }, x, opts.outer_step);
  const Matrix dF_dv =
      numeric::jacobian([&](const Velocity& w) { return F(m, x, w); }, v, opts.outer_step);
  jet.vgrad = dF_dv.transpose();

  const int n = m.dim;
  jet.nabla.resize(n, n);
  for (int i = 0; i < n; ++i) {
    // Gamma^b_{ia} v^a for every b
    Vector transport(n);
    for (int b = 0; b < n; ++b) transport[b] = jet.gamma.gamma[b].row(i).dot(v);
    for (int j = 0; j < n; ++j) {
      double value = jet.dF_dx(j, i) - transport.dot(jet.vgrad.col(j));
      for (int b = 0; b < n; ++b) value -= jet.gamma.gamma[b](i, j) * jet.F[b];
      jet.nabla(i, j) = value;
    }
  }
  return jet;
}

Vector residual_weak1(const ForceField& F, const MetricField& m, const Coords& x,
                      const Velocity& v, const DerivativeOptions& opts) {
  const Projector p = unit_direction(m, x, v, opts.speed_floor);
  ExtendedScalar contracted;
  contracted.fd_step = opts.outer_step;
  contracted.eval = [&](const Coords& y, const Velocity& w) {
    const Projector q = unit_direction(m, y, w, opts.speed_floor);
    return q.N_up.dot(F(m, y, w));
  };
  const Covector grad = velocity_gradient(contracted, m, x, v);
  return project_covector(p, F(m, x, v) / p.speed + grad);
}

Vector residual_weak2(const ForceJet& jet) {
  const Projector& p = jet.proj;
  const double speed = p.speed;
  const Matrix sym = jet.nabla + jet.nabla.transpose() -
                     (2.0 / (speed * speed)) * jet.F * jet.F.transpose();
  const double ntn = p.N_up.dot(jet.vgrad * p.N_up);
  // S_i = sum_j sym_ij N^j + sum_j F^j vgrad_ji / v - (N T N) F_i / v
  const Vector S = sym * p.N_up + jet.vgrad.transpose() * jet.F_up / speed - ntn * jet.F / speed;
  return project_covector(p, S);
}

Vector residual_weak2(const ForceField& F, const MetricField& m, const Coords& x,
                      const Velocity& v, const DerivativeOptions& opts) {
  return residual_weak2(force_jet(F, m, x, v, opts));
}

Matrix residual_additional1(const ForceJet& jet) {
  const Projector& p = jet.proj;
  // X_ij = (sum_m N^m vgrad_mj) F_i / v - nabla_i F_j
  const Vector nt = jet.vgrad.transpose() * p.N_up;
  const Matrix X = jet.F * nt.transpose() / p.speed - jet.nabla;
  const Matrix D = X - X.transpose();
  return p.P.transpose() * D * p.P;
}

Matrix residual_additional1(const ForceField& F, const MetricField& m, const Coords& x,
                            const Velocity& v, const DerivativeOptions& opts) {
  require_dim3(m);
  return residual_additional1(force_jet(F, m, x, v, opts));
}

Matrix residual_additional2(const ForceJet& jet) {
  const int n = static_cast<int>(jet.F.size());
  if (n < 3) throw Error(ErrorCode::DimensionTooSmall, "additional normality needs n >= 3");
  const Projector& p = jet.proj;
  // J^i_j = tilde-nabla_j F^i = g^{ik} dF_k/dv^j
  const Matrix J = jet.ginv * jet.vgrad.transpose();
  const Matrix PJP = p.P * J * p.P;
  return PJP - (PJP.trace() / (n - 1)) * p.P;
}

Matrix residual_additional2(const ForceField& F, const MetricField& m, const Coords& x,
                            const Velocity& v, const DerivativeOptions& opts) {
  require_dim3(m);
  return residual_additional2(force_jet(F, m, x, v, opts));
}

namespace {

Eq124Result eq124_from_hessian(const Projector& p, const Matrix& ginv, const Matrix& H, double value) {
  const int n = static_cast<int>(H.rows());
  const Matrix Pup = projector_up(p, ginv);
  Eq124Result out;
  out.lambda = (Pup.cwiseProduct(H)).sum() / (n - 1);
  out.residual = Pup * H.transpose() * p.P - out.lambda * p.P;
  out.scale = 1.0 + std::abs(value) + sup(H);
  return out;
}

AnsatzLevelResult ansatz_level_from_hessian(const ExtendedScalar& A, const MetricField& m,
                                            const Coords& x, const Velocity& v, const Projector& p,
                                            const Matrix& ginv, const Matrix& H, double value,
                                            double outer_scale) {
  const Covector dA = A.partial_v(x, v);
  const Covector nablaA = spatial_gradient(A, m, x, v);
  const Matrix M = mixed_gradient(A, m, x, v, outer_scale, &H);  // (r, s) = nabla_r tilde-nabla_s A
  const Matrix Pup = projector_up(p, ginv);

  AnsatzLevelResult out;
  // sum_s (nabla_s A + |v| P^{qr} dA_q H_rs - N^r A H_rs - |v| N^r M_rs) P^s_k
  const Vector inner = nablaA + p.speed * H.transpose() * (Pup * dA) -
                       value * H.transpose() * p.N_up - p.speed * M.transpose() * p.N_up;
  out.eq121 = project_covector(p, inner);

  // Y_rs = M_rs + dA_r (N^q H_qs)
  const Vector nh = H.transpose() * p.N_up;
  const Matrix Y = M + dA * nh.transpose();
  const Matrix Z = Y - Y.transpose();
  // sum_{r,s} P^r_sigma P^s_eps Z_rs, indexed (eps, sigma)
  out.eq122 = p.P.transpose() * Z.transpose() * p.P;
  out.scale = 1.0 + std::abs(value) + std::max({sup(dA), sup(H), sup(M), sup(nablaA)});
  return out;
}

}  // namespace

Eq124Result residual_eq124(const ExtendedScalar& A, const MetricField& m, const Coords& x,
                           const Velocity& v, const DerivativeOptions& opts) {
  require_dim3(m);
  const Projector p = unit_direction(m, x, v, opts.speed_floor);
  const Matrix H = velocity_hessian(A, m, x, v, opts.outer_step / std::sqrt(A.fd_step));
  return eq124_from_hessian(p, inverse_metric_at(m, x), H, A(x, v));
}

AnsatzLevelResult residual_ansatz_level(const ExtendedScalar& A, const MetricField& m,
                                        const Coords& x, const Velocity& v,
                                        const DerivativeOptions& opts) {
  require_dim3(m);
  const Projector p = unit_direction(m, x, v, opts.speed_floor);
  const double outer_scale = opts.outer_step / std::sqrt(A.fd_step);
  const Matrix H = velocity_hessian(A, m, x, v, outer_scale);
  return ansatz_level_from_hessian(A, m, x, v, p, inverse_metric_at(m, x), H, A(x, v), outer_scale);
}

ReducedResult residual_reduced(const AnsatzField& af, const MetricField& m, const Coords& x,
                               double speed, const DerivativeOptions& opts) {
  const int n = m.dim;
  if (static_cast<int>(af.b.size()) != n && !af.b_all) {
    throw Error(ErrorCode::DimensionMismatch, "ansatz covector b has wrong length");
  }
  if (!(speed > opts.speed_floor)) throw Error(ErrorCode::ZeroVelocity, "reduced at zero speed");
  const double h = opts.outer_step;
  auto b_at = [&](const Coords& y, double s) { return af.b_at(y, s); };
  const Vector b = b_at(x, speed);
  const double a = af.a(x, speed);
  const Matrix Db = numeric::jacobian([&](const Coords& y) { return b_at(y, speed); }, x, h);
  const Vector db = numeric::derivative([&](double s) { return b_at(x, s); }, speed, h);
  const Vector da_dx = numeric::gradient([&](const Coords& y) { return af.a(y, speed); }, x, h);
  const double da = numeric::derivative_scalar([&](double s) { return af.a(x, s); }, speed, h);

  ReducedResult out;
  out.b_residual = Matrix::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    for (int s = r + 1; s < n; ++s) {
      // (d_r + b_r d_v) b_s - (d_s + b_s d_v) b_r; Db(i, k) = d b_i / d x^k.
      const double w = Db(s, r) + b[r] * db[s] - Db(r, s) - b[s] * db[r];
      out.b_residual(r, s) = w;
      out.b_residual(s, r) = -w;
    }
  }
  out.a_residual = da_dx + b * da - a * db;
  out.scale = 1.0 + std::max({std::abs(a), sup(b), sup(Db), sup(db), sup(da_dx), std::abs(da)});
  return out;
}

std::vector<PhaseSample> generate_samples(const MetricField& m, const SampleSpec& spec) {
  const int n = m.dim;
  if (spec.count < 1) throw Error(ErrorCode::EvaluationFailure, "sample count must be >= 1");
  if (spec.box_lo.size() != n || spec.box_hi.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "sample box has wrong dimension");
  }
  if (!(spec.speed_lo > 0.0) || spec.speed_hi < spec.speed_lo) {
    throw Error(ErrorCode::ZeroVelocity, "sample speed range must be positive");
  }
  static constexpr std::array<int, 24> primes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                                 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
  const int dims = 2 * n + 1;
  if (dims > static_cast<int>(primes.size())) {
    throw Error(ErrorCode::DimensionMismatch, "sampler supports n <= 11");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> shift(dims);
  for (auto& s : shift) s = unit(rng);

  auto halton = [](long index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
      f /= base;
      r += f * static_cast<double>(index % base);
      index /= base;
    }
    return r;
  };

  std::vector<PhaseSample> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    std::vector<double> u(dims);
    for (int d = 0; d < dims; ++d) {
      double value = halton(i + 1, primes[d]) + shift[d];
      u[d] = value - std::floor(value);
    }
    PhaseSample s;
    s.x.resize(n);
    for (int k = 0; k < n; ++k) s.x[k] = spec.box_lo[k] + u[k] * (spec.box_hi[k] - spec.box_lo[k]);
    const double speed = spec.speed_lo + u[n] * (spec.speed_hi - spec.speed_lo);
    Vector z(n);
    for (int k = 0; k < n; ++k) {
      const double p = std::clamp(u[n + 1 + k], 1e-12, 1.0 - 1e-12);
      z[k] = std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0);
    }
    if (z.norm() < 1e-12) z[0] = 1.0;
    const double norm = speed_of(m, s.x, z);
    s.v = z * (speed / norm);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::pair<std::string, double>> NormalityReport::families() const {
  std::vector<std::pair<std::string, double>> out = {
      {"r_weak1", r_weak1}, {"r_weak2", r_weak2}, {"r_add1", r_add1}, {"r_add2", r_add2},
      {"r_eq124", r_eq124}, {"r_eq121", r_eq121}, {"r_eq122", r_eq122}};
  if (has_reduced) {
    out.emplace_back("r_reduced_b", r_reduced_b);
    out.emplace_back("r_reduced_a", r_reduced_a);
  }
  return out;
}

std::vector<std::string> NormalityReport::failing() const {
  std::vector<std::string> out;
  for (const auto& [name, value] : families()) {
    const bool nested = name == "r_eq124" || name == "r_eq121" || name == "r_eq122";
    if (!(value < (nested ? ansatz_tolerance_used : tolerance_used))) out.push_back(name);
  }
  return out;
}

double NormalityReport::max_residual() const {
  double worst = 0.0;
  for (const auto& [name, value] : families()) worst = std::max(worst, value);
  return worst;
}

namespace {

struct SampleResiduals {
  double weak1 = 0, weak2 = 0, add1 = 0, add2 = 0, eq124 = 0, eq121 = 0, eq122 = 0;
  double reduced_b = 0, reduced_a = 0;
  double lambda = 0;
};

NormalityReport run_verification(const ForceField& F, const ExtendedScalar& A,
                                 const AnsatzField* af, const MetricField& m,
                                 const SampleSpec& spec, const VerifyOptions& opts) {
  require_dim3(m);
  const std::vector<PhaseSample> samples = generate_samples(m, spec);
  std::vector<SampleResiduals> results(samples.size());
  DerivativeOptions hess = opts.derivatives;
  hess.outer_step *= opts.hessian_scale;

  detail::parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    const ForceJet jet = force_jet(F, m, s.x, s.v, opts.derivatives);
    const double scale = jet.scale();
    SampleResiduals r;
    r.weak1 = sup(residual_weak1(F, m, s.x, s.v, opts.derivatives)) / scale;
    r.weak2 = sup(residual_weak2(jet)) / scale;
    r.add1 = sup(residual_additional1(jet)) / scale;
    r.add2 = sup(residual_additional2(jet)) / scale;
    const double outer_scale = hess.outer_step / std::sqrt(A.fd_step);
    const Matrix H = velocity_hessian(A, m, s.x, s.v, outer_scale);
    const double value = A(s.x, s.v);
    const Eq124Result e = eq124_from_hessian(jet.proj, jet.ginv, H, value);
    r.eq124 = sup(e.residual) / e.scale;
    r.lambda = e.lambda;
    const AnsatzLevelResult al =
        ansatz_level_from_hessian(A, m, s.x, s.v, jet.proj, jet.ginv, H, value, outer_scale);
    r.eq121 = sup(al.eq121) / al.scale;
    r.eq122 = sup(al.eq122) / al.scale;
    if (af != nullptr) {
      const ReducedResult red = residual_reduced(*af, m, s.x, jet.proj.speed, opts.derivatives);
      r.reduced_b = sup(red.b_residual) / red.scale;
      r.reduced_a = sup(red.a_residual) / red.scale;
    }
    results[i] = r;
  });

  NormalityReport report;
  report.sample_count = static_cast<int>(samples.size());
  report.tolerance_used = opts.tolerance;
  report.ansatz_tolerance_used = opts.ansatz_tolerance > 0.0 ? opts.ansatz_tolerance : opts.tolerance;
  report.has_reduced = af != nullptr;
  for (const auto& r : results) {
    report.r_weak1 = std::max(report.r_weak1, r.weak1);
    report.r_weak2 = std::max(report.r_weak2, r.weak2);
    report.r_add1 = std::max(report.r_add1, r.add1);
    report.r_add2 = std::max(report.r_add2, r.add2);
    report.r_eq124 = std::max(report.r_eq124, r.eq124);
    report.r_eq121 = std::max(report.r_eq121, r.eq121);
    report.r_eq122 = std::max(report.r_eq122, r.eq122);
    report.r_reduced_b = std::max(report.r_reduced_b, r.reduced_b);
    report.r_reduced_a = std::max(report.r_reduced_a, r.reduced_a);
    report.lambda_samples.push_back(r.lambda);
  }
  for (const auto& [name, value] : report.families()) {
    if (!std::isfinite(value)) throw Error(ErrorCode::NonFinite, name + " is not finite");
  }
  report.pass = report.failing().empty();
  return report;
}

}  // namespace

NormalityReport verify(const ForceField& F, const MetricField& m, const SampleSpec& samples,
                       const VerifyOptions& opts) {
  ExtendedScalar A;
  A.fd_step = opts.derivatives.outer_step;
  A.eval = [F, m, floor = opts.derivatives.speed_floor](const Coords& x, const Velocity& v) {
    const Projector p = unit_direction(m, x, v, floor);
    return p.N_up.dot(F(m, x, v));
  };
  // The contracted scalar is itself a derived quantity, so its inner stencil
  // uses the outer step and the Hessian nests one level further out.
  return run_verification(F, A, nullptr, m, samples, opts);
}

NormalityReport verify(const GeneratingScalar& gs, const MetricField& m,
                       const SampleSpec& samples, const VerifyOptions& opts) {
  const ForceField F = make_force_field(gs, opts.derivatives.speed_floor);
  AnsatzField af = ansatz_from_generator(gs, m);
  ExtendedScalar A = ansatz_scalar(af, m, opts.derivatives.speed_floor);
  A.fd_step = opts.derivatives.outer_step;
  return run_verification(F, A, &af, m, samples, opts);
}

}  // namespace nshift
