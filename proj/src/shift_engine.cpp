#include "nshift/shift_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "nshift/error.hpp"
#include "nshift/numeric/diff.hpp"
#include "nshift/parallel.hpp"

namespace nshift {

namespace {

// Fourth-order first-derivative weights (times 1/12h) on five consecutive
// points, for evaluation at offset j within the window.
constexpr std::array<std::array<double, 5>, 5> kStencil = {{
    {-25.0, 48.0, -36.0, 16.0, -3.0},
    {-3.0, -10.0, 18.0, -6.0, 1.0},
    {1.0, -8.0, 0.0, 8.0, -1.0},
    {-1.0, 6.0, -18.0, 10.0, 3.0},
    {3.0, -16.0, 36.0, -48.0, 25.0},
}};

// Window start and offset for a derivative at index i of c points.
std::pair<int, int> stencil_window(int i, int c) {
  const int start = std::clamp(i - 2, 0, c - 5);
  return {start, i - start};
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

Coords Hypersurface::point(const Vector& u) const {
  if (u.size() != dim_u) throw Error(ErrorCode::DimensionMismatch, "surface parameter has wrong length");
  Coords x = chart_map(u);
  if (x.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "chart map returned wrong dimension");
  if (!all_finite(x)) throw Error(ErrorCode::NonFinite, "chart map is not finite");
  return x;
}

Matrix Hypersurface::tangents(const Vector& u) const {
  if (du) {
    Matrix t = du(u);
    if (t.rows() != dim() || t.cols() != dim_u) {
      throw Error(ErrorCode::DimensionMismatch, "surface tangents have wrong shape");
    }
    return t;
  }
  return numeric::jacobian([this](const Vector& w) { return point(w); }, u, fd_step);
}

Hypersurface Hypersurface::plane(int dim, double offset) {
  if (dim < 2) throw Error(ErrorCode::DimensionTooSmall, "plane needs n >= 2");
  Hypersurface s;
  s.dim_u = dim - 1;
  s.chart_map = [dim, offset](const Vector& u) {
    Coords x(dim);
    x.head(dim - 1) = u;
    x[dim - 1] = offset;
    return x;
  };
  s.du = [dim](const Vector&) {
    Matrix t = Matrix::Zero(dim, dim - 1);
    t.topRows(dim - 1).setIdentity();
    return t;
  };
  s.base_u = Vector::Zero(dim - 1);
  return s;
}

Hypersurface Hypersurface::sphere(Coords center, double radius) {
  const int dim = static_cast<int>(center.size());
  if (dim < 2) throw Error(ErrorCode::DimensionTooSmall, "sphere needs n >= 2");
  if (!(radius > 0.0)) throw Error(ErrorCode::EvaluationFailure, "sphere radius must be positive");
  Hypersurface s;
  s.dim_u = dim - 1;
  s.chart_map = [center, radius, dim](const Vector& u) {
    Coords x(dim);
    double prod = radius;
    for (int k = 0; k < dim - 1; ++k) {
      x[k] = center[k] + prod * std::cos(u[k]);
      prod *= std::sin(u[k]);
    }
    x[dim - 1] = center[dim - 1] + prod;
    return x;
  };
  s.du = [radius, dim](const Vector& u) {
    // x^k - c^k = r sin u^1 ... sin u^{k-1} cos u^k (last: all sines)
    Matrix t = Matrix::Zero(dim, dim - 1);
    for (int k = 0; k < dim; ++k) {
      for (int j = 0; j < dim - 1 && j <= k; ++j) {
        double value = radius;
        for (int i = 0; i < std::min(k, dim - 1); ++i) {
          value *= (i == j) ? std::cos(u[i]) : std::sin(u[i]);
        }
        if (k < dim - 1) value *= (k == j) ? -std::sin(u[k]) : std::cos(u[k]);
        t(k, j) = value;
      }
    }
    return t;
  };
  s.base_u = Vector::Constant(dim - 1, M_PI / 2);
  return s;
}

Hypersurface Hypersurface::graph(int dim, std::function<double(const Vector&)> height) {
  if (dim < 2) throw Error(ErrorCode::DimensionTooSmall, "graph needs n >= 2");
  Hypersurface s;
  s.dim_u = dim - 1;
  s.chart_map = [dim, height](const Vector& u) {
    Coords x(dim);
    x.head(dim - 1) = u;
    x[dim - 1] = height(u);
    return x;
  };
  s.base_u = Vector::Zero(dim - 1);
  return s;
}

Vector surface_normal(const MetricField& m, const Hypersurface& s, const Vector& u) {
  const Coords x = s.point(u);
  if (x.size() != m.dim) throw Error(ErrorCode::DimensionMismatch, "surface and metric dimensions differ");
  const int n = m.dim;
  const Matrix tau = s.tangents(u);
  const Matrix g = metric_at(m, x);

  const Matrix gram = tau.transpose() * g * tau;
  const double diag = gram.diagonal().prod();
  if (!(diag > 0.0) || std::abs(gram.determinant()) < 1e-12 * diag) {
    throw Error(ErrorCode::DegenerateTangents, "surface tangents are linearly dependent");
  }

  // omega_i = det[e_i, tau_1, ..., tau_{n-1}] annihilates every tangent.
  Covector omega(n);
  Matrix block(n, n);
  block.rightCols(n - 1) = tau;
  for (int i = 0; i < n; ++i) {
    block.col(0).setZero();
    block(i, 0) = 1.0;
    omega[i] = block.determinant();
  }
  const Vector up = inverse_metric_at(m, x) * omega;
  const double norm2 = omega.dot(up);
  if (!(norm2 > 0.0)) throw Error(ErrorCode::DegenerateTangents, "surface normal vanishes");
  return (s.orientation >= 0 ? 1.0 : -1.0) * up / std::sqrt(norm2);
}

double solve_nu(const GeneratingScalar& gs, const MetricField& m, const Hypersurface& s,
                const Vector& u) {
  if (!(s.nu0 != 0.0) || !std::isfinite(s.nu0)) {
    throw Error(ErrorCode::ZeroVelocity, "nu0 must be a nonzero real");
  }
  const double s0 = std::abs(s.nu0);
  const Coords x0 = s.point(s.base_u);
  const Coords x = s.point(u);
  if (x.size() != m.dim) throw Error(ErrorCode::DimensionMismatch, "surface and metric dimensions differ");
  const double W0 = gs.W(x0, s0);
  const double tol = 1e-12 * (1.0 + std::abs(W0));
  auto residual = [&](double speed) { return gs.W(x, speed) - W0; };
  const double sign = s.nu0 > 0 ? 1.0 : -1.0;

  double r0 = residual(s0);
  if (std::abs(r0) < tol) return s.nu0;

  double lo = s0 / 8.0, hi = s0 * 8.0;
  double flo = residual(lo), fhi = residual(hi);
  for (int grow = 0; flo * fhi > 0.0; ++grow) {
    if (grow >= 12) {
      throw Error(ErrorCode::RootNotBracketed,
                  "no speed solves W(x(u), nu) = W0 in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
    }
    lo /= 8.0;
    hi *= 8.0;
    flo = residual(lo);
    fhi = residual(hi);
  }
  if (std::abs(flo) < tol) return sign * lo;
  if (std::abs(fhi) < tol) return sign * hi;

  // Start Newton from nu0 if it lies in the bracket, else from the midpoint.
  double speed = (s0 > lo && s0 < hi) ? s0 : 0.5 * (lo + hi);
  double f = residual(speed);
  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(f) < tol) return sign * speed;
    if ((f < 0) == (flo < 0)) {
      lo = speed;
      flo = f;
    } else {
      hi = speed;
    }
    const double wv = gs.checked_wv(x, speed);
    double next = speed - f / wv;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    speed = next;
    f = residual(speed);
    if (hi - lo < 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  if (std::abs(f) < tol) return sign * speed;
  throw Error(ErrorCode::RootNotBracketed, "speed solve did not reach tolerance");
}

PhaseState step_trajectory(const ForceField& F, const MetricField& m, const PhaseState& st,
                           double dt, double speed_floor) {
  if (!(dt > 0.0)) throw Error(ErrorCode::EvaluationFailure, "time step must be positive");
  const int n = m.dim;
  if (st.x.size() != n || st.v.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "phase state has wrong dimension");
  }
  auto rhs = [&](const Coords& x, const Velocity& v, Vector& dx, Vector& dv) {
    if (!all_finite(x) || !all_finite(v)) throw Error(ErrorCode::NonFinite, "trajectory state overflowed");
    if (!(speed_of(m, x, v) > speed_floor)) {
      throw Error(ErrorCode::ZeroVelocity, "speed collapsed below the floor");
    }
    dx = v;
    dv = raise_index(m, x, F(m, x, v)) - christoffel_at(m, x).contract(v, v);
  };
  Vector k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v;
  rhs(st.x, st.v, k1x, k1v);
  rhs(st.x + 0.5 * dt * k1x, st.v + 0.5 * dt * k1v, k2x, k2v);
  rhs(st.x + 0.5 * dt * k2x, st.v + 0.5 * dt * k2v, k3x, k3v);
  rhs(st.x + dt * k3x, st.v + dt * k3v, k4x, k4v);
  PhaseState out;
  out.x = st.x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  out.v = st.v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  out.t = st.t + dt;
  if (!all_finite(out.x) || !all_finite(out.v)) {
    throw Error(ErrorCode::NonFinite, "trajectory state overflowed");
  }
  if (!(speed_of(m, out.x, out.v) > speed_floor)) {
    throw Error(ErrorCode::ZeroVelocity, "speed collapsed below the floor");
  }
  return out;
}

ShiftRecord run_shift(const GeneratingScalar& gs, const MetricField& m, const Hypersurface& s,
                      const GridSpec& grid, double t_end, double dt,
                      const ShiftOptions& options) {
  const int n = m.dim;
  const int nu = s.dim_u;
  if (s.dim() != n) throw Error(ErrorCode::DimensionMismatch, "surface and metric dimensions differ");
  if (grid.lo.size() != nu || grid.hi.size() != nu || static_cast<int>(grid.count.size()) != nu) {
    throw Error(ErrorCode::DimensionMismatch, "u-grid has wrong dimension");
  }
  for (int k = 0; k < nu; ++k) {
    if (grid.count[k] < 5) {
      throw Error(ErrorCode::GridTooCoarse, "need at least 5 grid points per u-direction");
    }
    if (!(grid.hi[k] > grid.lo[k])) throw Error(ErrorCode::GridTooCoarse, "empty u-grid interval");
  }
  if (!(t_end > 0.0) || !(dt > 0.0)) {
    throw Error(ErrorCode::EvaluationFailure, "t_end and dt must be positive");
  }
  if (options.sample_stride < 1) throw Error(ErrorCode::EvaluationFailure, "sample_stride must be >= 1");
  const bool boxed = options.box_lo.size() > 0;
  if (boxed && (options.box_lo.size() != n || options.box_hi.size() != n)) {
    throw Error(ErrorCode::DimensionMismatch, "chart box has wrong dimension");
  }

  const long steps = std::max<long>(1, std::lround(t_end / dt));
  const double h_t = t_end / static_cast<double>(steps);

  ShiftRecord rec;
  rec.dim = n;
  rec.grid_count = grid.count;
  rec.spacing.resize(nu);
  std::size_t total = 1;
  for (int k = 0; k < nu; ++k) {
    rec.spacing[k] = (grid.hi[k] - grid.lo[k]) / (grid.count[k] - 1);
    total *= static_cast<std::size_t>(grid.count[k]);
  }
  rec.u_grid.resize(total);
  rec.central.assign(total, true);
  for (std::size_t id = 0; id < total; ++id) {
    Vector u(nu);
    std::size_t rest = id;
    for (int k = 0; k < nu; ++k) {
      const int i = static_cast<int>(rest % grid.count[k]);
      rest /= grid.count[k];
      u[k] = grid.lo[k] + i * rec.spacing[k];
      if (i < 2 || i > grid.count[k] - 3) rec.central[id] = false;
    }
    rec.u_grid[id] = u;
  }
  std::vector<long> record_steps;
  for (long i = 0; i <= steps; i += options.sample_stride) record_steps.push_back(i);
  if (record_steps.back() != steps) record_steps.push_back(steps);
  for (long i : record_steps) rec.times.push_back(static_cast<double>(i) * h_t);

  const ForceField F = make_force_field(gs, options.speed_floor);
  rec.states.assign(total, {});
  rec.nu_vals.assign(total, 0.0);
  rec.W_vals.assign(total, {});
  rec.speed_vals.assign(total, {});

  detail::parallel_for(total, [&](std::size_t id) {
    const Vector& u = rec.u_grid[id];
    const double nu_value = options.force_constant_nu ? s.nu0 : solve_nu(gs, m, s, u);
    PhaseState st;
    st.x = s.point(u);
    st.v = nu_value * surface_normal(m, s, u);
    st.t = 0.0;
    std::vector<PhaseState> track;
    track.reserve(rec.times.size());
    std::size_t next = 0;
    for (long i = 0; i <= steps; ++i) {
      if (i > 0) {
        st = step_trajectory(F, m, st, h_t, options.speed_floor);
        st.t = static_cast<double>(i) * h_t;
        if (boxed) {
          for (int k = 0; k < n; ++k) {
            if (st.x[k] < options.box_lo[k] || st.x[k] > options.box_hi[k]) {
              throw Error(ErrorCode::TrajectoryEscaped,
                          "trajectory " + std::to_string(id) + " left the chart box at t = " +
                              std::to_string(st.t));
            }
          }
        }
      }
      if (next < record_steps.size() && record_steps[next] == i) {
        track.push_back(st);
        ++next;
      }
    }
    std::vector<double> W(track.size()), speeds(track.size());
    for (std::size_t j = 0; j < track.size(); ++j) {
      speeds[j] = speed_of(m, track[j].x, track[j].v);
      W[j] = gs.W(track[j].x, speeds[j]);
    }
    rec.nu_vals[id] = nu_value;
    rec.states[id] = std::move(track);
    rec.W_vals[id] = std::move(W);
    rec.speed_vals[id] = std::move(speeds);
  });

  // Deviation functions: a barrier over the completed family.
  const std::size_t nt = rec.times.size();
  rec.phi.assign(total, std::vector<Vector>(nt, Vector::Zero(nu)));
  rec.phi_scale.assign(total, std::vector<Vector>(nt, Vector::Zero(nu)));
  std::vector<std::size_t> stride(nu, 1);
  for (int k = 1; k < nu; ++k) stride[k] = stride[k - 1] * grid.count[k - 1];

  detail::parallel_for(total, [&](std::size_t id) {
    const Matrix tau0 = s.tangents(rec.u_grid[id]);
    std::vector<int> index(nu);
    std::size_t rest = id;
    for (int k = 0; k < nu; ++k) {
      index[k] = static_cast<int>(rest % grid.count[k]);
      rest /= grid.count[k];
    }
    for (std::size_t j = 0; j < nt; ++j) {
      const PhaseState& st = rec.states[id][j];
      const Matrix g = metric_at(m, st.x);
      const double speed = rec.speed_vals[id][j];
      for (int k = 0; k < nu; ++k) {
        Vector tau;
        if (j == 0) {
          // Exact chart tangents at t = 0, where the family is the surface itself.
          tau = tau0.col(k);
        } else {
          const auto [start, offset] = stencil_window(index[k], grid.count[k]);
          tau = Vector::Zero(n);
          for (int p = 0; p < 5; ++p) {
            const std::size_t other = id + (static_cast<std::size_t>(start + p) - index[k]) * stride[k];
            tau += kStencil[offset][p] * rec.states[other][j].x;
          }
          tau /= 12.0 * rec.spacing[k];
        }
        rec.phi[id][j][k] = tau.dot(g * st.v);
        rec.phi_scale[id][j][k] = speed * std::sqrt(tau.dot(g * tau));
      }
    }
  });
  return rec;
}

double w_dynamics_residual(const ShiftRecord& rec, const GeneratingScalar& gs) {
  if (rec.trajectory_count() == 0 || rec.times.empty()) {
    throw Error(ErrorCode::EvaluationFailure, "shift record is empty");
  }
  double worst = 0.0;
  for (std::size_t id = 0; id < rec.trajectory_count(); ++id) {
    double w = rec.W_vals[id][0];
    for (std::size_t j = 1; j < rec.times.size(); ++j) {
      const double h = rec.times[j] - rec.times[j - 1];
      const double k1 = gs.h(w);
      const double k2 = gs.h(w + 0.5 * h * k1);
      const double k3 = gs.h(w + 0.5 * h * k2);
      const double k4 = gs.h(w + h * k3);
      w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      worst = std::max(worst, std::abs(rec.W_vals[id][j] - w));
    }
  }
  return worst;
}

std::vector<double> surface_constancy_residual(const ShiftRecord& rec) {
  std::vector<double> out(rec.times.size(), 0.0);
  if (rec.trajectory_count() == 0) return out;
  for (std::size_t j = 0; j < rec.times.size(); ++j) {
    double lo = rec.W_vals[0][j], hi = lo;
    for (std::size_t id = 1; id < rec.trajectory_count(); ++id) {
      lo = std::min(lo, rec.W_vals[id][j]);
      hi = std::max(hi, rec.W_vals[id][j]);
    }
    out[j] = hi - lo;
  }
  return out;
}

double max_normalized_deviation(const ShiftRecord& rec, double from_time, bool include_edges) {
  double worst = 0.0;
  for (std::size_t id = 0; id < rec.trajectory_count(); ++id) {
    if (!include_edges && !rec.central[id]) continue;
    for (std::size_t j = 0; j < rec.times.size(); ++j) {
      if (rec.times[j] < from_time) continue;
      for (Eigen::Index k = 0; k < rec.phi[id][j].size(); ++k) {
        worst = std::max(worst, std::abs(rec.phi[id][j][k]) / rec.phi_scale[id][j][k]);
      }
    }
  }
  return worst;
}

double speed_law_residual(const ShiftRecord& rec, const GeneratingScalar& gs,
                          const MetricField& m) {
  // Only the uniformly spaced prefix of the time grid enters the stencil.
  std::size_t nt = rec.times.size();
  if (nt >= 3) {
    const double h0 = rec.times[1] - rec.times[0];
    if (std::abs((rec.times[nt - 1] - rec.times[nt - 2]) - h0) > 1e-9 * h0) --nt;
  }
  if (nt < 5) throw Error(ErrorCode::GridTooCoarse, "speed law needs at least 5 recorded times");
  const double h = rec.times[1] - rec.times[0];
  const ForceField F = make_force_field(gs);
  std::vector<double> worst(rec.trajectory_count(), 0.0);
  detail::parallel_for(rec.trajectory_count(), [&](std::size_t id) {
    const auto& speeds = rec.speed_vals[id];
    for (std::size_t j = 0; j < nt; ++j) {
      const auto [start, offset] = stencil_window(static_cast<int>(j), static_cast<int>(nt));
      double d = 0.0;
      for (int p = 0; p < 5; ++p) d += kStencil[offset][p] * speeds[start + p];
      d /= 12.0 * h;
      const PhaseState& st = rec.states[id][j];
      const Projector proj = unit_direction(m, st.x, st.v);
      const double law = proj.N_up.dot(F(m, st.x, st.v));
      worst[id] = std::max(worst[id], std::abs(d - law));
    }
  });
  return *std::max_element(worst.begin(), worst.end());
}

}  // namespace nshift
