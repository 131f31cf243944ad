#include "nshift/force_builder.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nshift/error.hpp"

namespace nshift {

double GeneratingScalar::checked_wv(const Coords& x, double speed) const {
  const double wv = W.partial_speed(x, speed);
  if (!(std::abs(wv) >= wv_floor)) {
    throw Error(ErrorCode::DegenerateWv,
                "|dW/dv| = " + std::to_string(std::abs(wv)) + " below floor");
  }
  return wv;
}

std::string_view to_string(ForceOrigin origin) noexcept {
  switch (origin) {
    case ForceOrigin::GeneratedFromW: return "generated-from-W";
    case ForceOrigin::Ansatz: return "ansatz";
    case ForceOrigin::User: return "user";
  }
  return "user";
}

Covector ForceField::operator()(const MetricField& m, const Coords& x, const Velocity& v) const {
  Covector f = eval(m, x, v);
  if (!f.allFinite()) throw Error(ErrorCode::NonFinite, "force field is not finite");
  return f;
}

Covector compute_b(const GeneratingScalar& gs, const MetricField& m, const Coords& x,
                   double speed) {
  const double wv = gs.checked_wv(x, speed);
  return -spatial_gradient_isotropic(gs.W, m, x, speed) / wv;
}

double compute_a(const GeneratingScalar& gs, const MetricField&, const Coords& x, double speed) {
  const double wv = gs.checked_wv(x, speed);
  return gs.h(gs.W(x, speed)) / wv;
}

Covector AnsatzField::b_at(const Coords& x, double speed) const {
  if (b_all) return b_all(x, speed);
  Covector out(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) out[static_cast<Eigen::Index>(i)] = b[i](x, speed);
  return out;
}

AnsatzField ansatz_from_generator(const GeneratingScalar& gs, const MetricField& m) {
  AnsatzField af;
  af.a.fd_step = gs.W.fd_step;
  af.a.eval = [gs, m](const Coords& x, double s) { return compute_a(gs, m, x, s); };
  af.b.resize(m.dim);
  for (int k = 0; k < m.dim; ++k) {
    af.b[k].fd_step = gs.W.fd_step;
    af.b[k].eval = [gs, m, k](const Coords& x, double s) { return compute_b(gs, m, x, s)[k]; };
  }
  af.b_all = [gs, m](const Coords& x, double s) { return compute_b(gs, m, x, s); };
  return af;
}

double ansatz_A(const AnsatzField& af, const MetricField& m, const Coords& x, const Velocity& v,
                double speed_floor) {
  const double speed = speed_of(m, x, v);
  if (!(speed > speed_floor)) throw Error(ErrorCode::ZeroVelocity, "ansatz at zero velocity");
  return af.a(x, speed) + af.b_at(x, speed).dot(v);
}

ExtendedScalar ansatz_scalar(const AnsatzField& af, const MetricField& m, double speed_floor) {
  ExtendedScalar A;
  A.fd_step = af.a.fd_step;
  A.eval = [af, m, speed_floor](const Coords& x, const Velocity& v) {
    return ansatz_A(af, m, x, v, speed_floor);
  };
  return A;
}

Covector force_from_A(const ExtendedScalar& A, const MetricField& m, const Coords& x,
                      const Velocity& v, double speed_floor) {
  const Projector p = unit_direction(m, x, v, speed_floor);
  const Covector grad = velocity_gradient(A, m, x, v);
  // sum_i grad_i P^i_k = grad_k - (grad . N^) N_k
  const Covector projected = grad - grad.dot(p.N_up) * p.N_down;
  return A(x, v) * p.N_down - p.speed * projected;
}

Covector force_from_ab(const AnsatzField& af, const MetricField& m, const Coords& x,
                       const Velocity& v, double speed_floor) {
  const Projector p = unit_direction(m, x, v, speed_floor);
  const Covector b = af.b_at(x, p.speed);
  return af.a(x, p.speed) * p.N_down + p.speed * (2.0 * b.dot(p.N_up) * p.N_down - b);
}

Covector force_from_W(const GeneratingScalar& gs, const MetricField& m, const Coords& x,
                      const Velocity& v, double speed_floor) {
  const Projector p = unit_direction(m, x, v, speed_floor);
  const double wv = gs.checked_wv(x, p.speed);
  const Covector ratio = spatial_gradient_isotropic(gs.W, m, x, p.speed) / wv;
  const double normal = gs.h(gs.W(x, p.speed)) / wv;
  return normal * p.N_down - p.speed * (2.0 * ratio.dot(p.N_up) * p.N_down - ratio);
}

ForceField make_force_field(GeneratingScalar gs, double speed_floor) {
  ForceField f;
  f.label = ForceOrigin::GeneratedFromW;
  f.eval = [gs = std::move(gs), speed_floor](const MetricField& m, const Coords& x,
                                             const Velocity& v) {
    return force_from_W(gs, m, x, v, speed_floor);
  };
  return f;
}

ForceField make_ansatz_force(ExtendedScalar A, double speed_floor) {
  ForceField f;
  f.label = ForceOrigin::Ansatz;
  f.eval = [A = std::move(A), speed_floor](const MetricField& m, const Coords& x,
                                           const Velocity& v) {
    return force_from_A(A, m, x, v, speed_floor);
  };
  return f;
}

GeneratingScalar gauge_transform(const GeneratingScalar& gs, const GaugeMap& gauge) {
  if (!gauge.rho || !gauge.rho_inv || !gauge.rho_prime) {
    throw Error(ErrorCode::NonMonotoneGauge, "gauge map needs rho, its inverse and derivative");
  }
  int sign = 0;
  const int count = std::max(gauge.probe_count, 2);
  for (int i = 0; i < count; ++i) {
    const double w = gauge.probe_lo + (gauge.probe_hi - gauge.probe_lo) * i / (count - 1);
    const double d = gauge.rho_prime(w);
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (s == 0 || !std::isfinite(d) || (sign != 0 && s != sign)) {
      throw Error(ErrorCode::NonMonotoneGauge,
                  "rho' vanishes or changes sign near w = " + std::to_string(w));
    }
    sign = s;
  }

  auto rho_prime_checked = [gp = gauge.rho_prime, sign](double w) {
    const double d = gp(w);
    if (!std::isfinite(d) || d * sign <= 0.0) {
      throw Error(ErrorCode::NonMonotoneGauge, "rho' lost monotonicity at w = " + std::to_string(w));
    }
    return d;
  };

  GeneratingScalar out;
  out.name = gs.name.empty() ? "gauged" : gs.name + "+gauge";
  out.wv_floor = gs.wv_floor;
  out.W.fd_step = gs.W.fd_step;
  const IsotropicScalar W = gs.W;
  const ScalarFn rho = gauge.rho;
  out.W.eval = [W, rho](const Coords& x, double s) { return rho(W(x, s)); };
  out.W.dx = [W, rho_prime_checked](const Coords& x, double s) -> Covector {
    return rho_prime_checked(W(x, s)) * W.partial_x(x, s);
  };
  out.W.dspeed = [W, rho_prime_checked](const Coords& x, double s) {
    return rho_prime_checked(W(x, s)) * W.partial_speed(x, s);
  };
  const ScalarFn h = gs.h;
  const ScalarFn rho_inv = gauge.rho_inv;
  out.h = [h, rho_inv, rho_prime_checked](double w) {
    const double base = rho_inv(w);
    return h(base) * rho_prime_checked(base);
  };
  return out;
}

GeneratingScalar builtin_geodesic() {
  GeneratingScalar gs;
  gs.name = "geodesic";
  gs.W.eval = [](const Coords&, double s) { return s; };
  gs.W.dx = [](const Coords& x, double) -> Covector { return Covector::Zero(x.size()); };
  gs.W.dspeed = [](const Coords&, double) { return 1.0; };
  gs.h = [](double) { return 0.0; };
  return gs;
}

GeneratingScalar builtin_metrizable(PositionScalar f, ScalarFn H) {
  GeneratingScalar gs;
  gs.name = "metrizable";
  gs.W.fd_step = f.fd_step;
  gs.W.eval = [f](const Coords& x, double s) { return s * std::exp(-f(x)); };
  if (f.grad) {
    gs.W.dx = [f](const Coords& x, double s) -> Covector {
      return -s * std::exp(-f(x)) * f.gradient(x);
    };
    gs.W.dspeed = [f](const Coords& x, double) { return std::exp(-f(x)); };
  }
  gs.h = std::move(H);
  return gs;
}

namespace {

// Tabulated antiderivative I(v) = int_1^v s / A(s) ds on a geometric speed grid.
class SpeedIntegral {
 public:
  SpeedIntegral(ScalarFn A, const QuadratureCache& cache) : A_(std::move(A)) {
    if (!(cache.speed_lo > 0.0) || !(cache.speed_hi > cache.speed_lo) || cache.nodes < 2) {
      throw Error(ErrorCode::QuadratureFailure, "invalid quadrature cache interval");
    }
    const double ratio = std::log(cache.speed_hi / cache.speed_lo);
    nodes_.reserve(cache.nodes + 1);
    for (int i = 0; i < cache.nodes; ++i) {
      nodes_.push_back(cache.speed_lo * std::exp(ratio * i / (cache.nodes - 1)));
    }
    if (1.0 >= cache.speed_lo && 1.0 <= cache.speed_hi) nodes_.push_back(1.0);
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());

    sign_ = 0;
    for (double s : nodes_) check_integrand(s);

    // Tabulate outward from the reference speed 1 (or from the nearest node).
    values_.assign(nodes_.size(), 0.0);
    const auto ref = std::lower_bound(nodes_.begin(), nodes_.end(), 1.0);
    std::size_t start = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(ref - nodes_.begin(), static_cast<std::ptrdiff_t>(nodes_.size()) - 1));
    values_[start] = integrate(1.0, nodes_[start]);
    for (std::size_t i = start + 1; i < nodes_.size(); ++i) {
      values_[i] = values_[i - 1] + integrate(nodes_[i - 1], nodes_[i]);
    }
    for (std::size_t i = start; i-- > 0;) {
      values_[i] = values_[i + 1] + integrate(nodes_[i + 1], nodes_[i]);
    }
  }

  double operator()(double v) const {
    if (!(v > 0.0)) throw Error(ErrorCode::QuadratureFailure, "speed must be positive");
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), v);
    std::size_t idx;
    if (it == nodes_.end()) {
      idx = nodes_.size() - 1;
    } else if (it == nodes_.begin()) {
      idx = 0;
    } else {
      idx = static_cast<std::size_t>(it - nodes_.begin());
      if (std::abs(nodes_[idx - 1] - v) < std::abs(nodes_[idx] - v)) --idx;
    }
    if (v < nodes_.front() || v > nodes_.back()) check_integrand(v);
    return values_[idx] + integrate(nodes_[idx], v);
  }

  double integrand(double s) const { return s / A_(s); }

 private:
  void check_integrand(double s) const {
    const double a = A_(s);
    const int sign = a > 0 ? 1 : (a < 0 ? -1 : 0);
    if (sign == 0 || !std::isfinite(a)) {
      throw Error(ErrorCode::QuadratureFailure, "A vanishes at speed " + std::to_string(s));
    }
    if (sign_ == 0) {
      sign_ = sign;
    } else if (sign != sign_) {
      throw Error(ErrorCode::QuadratureFailure,
                  "A changes sign in the speed range near " + std::to_string(s));
    }
  }

  double integrate(double from, double to) const {
    if (from == to) return 0.0;
    // Deep recursion only accumulates rounding floors in Boost's error
    // estimate, so the depth is capped; the cache keeps intervals short.
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        [this](double s) { return integrand(s); }, from, to, 6, 1e-10, &error, &l1);
    if (!std::isfinite(value) || error > 1e-9 * std::max(1.0, l1)) {
      throw Error(ErrorCode::QuadratureFailure,
                  "integral of v/A(v) did not converge on [" + std::to_string(from) + ", " +
                      std::to_string(to) + "]");
    }
    return value;
  }

  ScalarFn A_;
  std::vector<double> nodes_;
  std::vector<double> values_;
  mutable int sign_ = 0;
};

}  // namespace

GeneratingScalar builtin_nonmetrizable(PositionScalar f, ScalarFn A, QuadratureCache cache) {
  auto integral = std::make_shared<const SpeedIntegral>(A, cache);
  GeneratingScalar gs;
  gs.name = "nonmetrizable";
  gs.W.fd_step = f.fd_step;
  gs.W.eval = [f, integral](const Coords& x, double s) { return std::exp((*integral)(s) - f(x)); };
  if (f.grad) {
    gs.W.dx = [f, integral](const Coords& x, double s) -> Covector {
      return -std::exp((*integral)(s) - f(x)) * f.gradient(x);
    };
    gs.W.dspeed = [f, integral](const Coords& x, double s) {
      return std::exp((*integral)(s) - f(x)) * integral->integrand(s);
    };
  }
  gs.h = [](double) { return 0.0; };
  return gs;
}

GeneratingScalar without_analytic_partials(GeneratingScalar gs) {
  gs.W.dx = nullptr;
  gs.W.dspeed = nullptr;
  return gs;
}

}  // namespace nshift
