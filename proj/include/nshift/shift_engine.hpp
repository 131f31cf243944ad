#pragma once

#include <functional>
#include <vector>

#include "nshift/force_builder.hpp"
#include "nshift/tensor_core.hpp"

namespace nshift {

/// Parametrised hypersurface x = chart_map(u), u in R^{n-1}.
struct Hypersurface {
  using ChartFn = std::function<Coords(const Vector&)>;
  using TangentFn = std::function<Matrix(const Vector&)>;

  int dim_u = 2;
  ChartFn chart_map;
  TangentFn du;  ///< optional; n x (n-1), column k is dx/du^k
  Vector base_u;
  double nu0 = 1.0;
  int orientation = 1;
  double fd_step = 1e-5;

  int dim() const noexcept { return dim_u + 1; }
  Coords point(const Vector& u) const;
  /// Tangent vectors tau_k as columns.
  Matrix tangents(const Vector& u) const;

  /// x^n = offset, parametrised by the first n-1 coordinates.
  static Hypersurface plane(int dim, double offset = 0.0);
  /// Sphere of the given radius about `center` in hyperspherical angles
  /// x^1 = r cos u^1, x^2 = r sin u^1 cos u^2, ... The positive orientation is outward.
  static Hypersurface sphere(Coords center, double radius);
  /// Graph x^n = height(u^1, ..., u^{n-1}).
  static Hypersurface graph(int dim, std::function<double(const Vector&)> height);
};

struct PhaseState {
  Coords x;
  Velocity v;
  double t = 0.0;
};

/// Unit normal n^i at chart_map(u): g(n, tau_k) = 0, g(n, n) = 1.
Vector surface_normal(const MetricField& m, const Hypersurface& s, const Vector& u);

/// Initial speed nu(u) solving W(x(u), |nu|) = W(x(base_u), |nu0|), with the sign of nu0.
double solve_nu(const GeneratingScalar& gs, const MetricField& m, const Hypersurface& s,
                const Vector& u);

/// One classical RK4 step of x' = v, v'^k = F^k - Gamma^k_ij v^i v^j.
PhaseState step_trajectory(const ForceField& F, const MetricField& m, const PhaseState& st,
                           double dt, double speed_floor = kDefaultSpeedFloor);

/// Tensor grid in u: count[k] equally spaced points on [lo[k], hi[k]].
struct GridSpec {
  Vector lo;
  Vector hi;
  std::vector<int> count;
};

struct ShiftOptions {
  bool force_constant_nu = false;  ///< use nu0 everywhere instead of solve_nu
  int sample_stride = 1;           ///< record every stride-th step (the last step is always kept)
  Vector box_lo;                   ///< chart box; empty means unbounded
  Vector box_hi;
  double speed_floor = kDefaultSpeedFloor;
};

/// Trajectory family of one shift run. Per-trajectory arrays are indexed
/// [traj][time]; trajectory ids enumerate the u-grid with u^1 fastest.
struct ShiftRecord {
  int dim = 0;
  std::vector<int> grid_count;
  Vector spacing;
  std::vector<Vector> u_grid;
  std::vector<double> times;
  std::vector<std::vector<PhaseState>> states;
  std::vector<std::vector<Vector>> phi;        ///< phi_k = g(tau_k, v)
  std::vector<std::vector<Vector>> phi_scale;  ///< |v| |tau_k|_g
  std::vector<std::vector<double>> W_vals;
  std::vector<std::vector<double>> speed_vals;
  std::vector<double> nu_vals;
  /// True where every u-direction admits the centred five-point stencil. At
  /// the two outermost grid lines tau_k falls back to one-sided stencils.
  std::vector<bool> central;

  std::size_t trajectory_count() const noexcept { return u_grid.size(); }
};

ShiftRecord run_shift(const GeneratingScalar& gs, const MetricField& m, const Hypersurface& s,
                      const GridSpec& grid, double t_end, double dt,
                      const ShiftOptions& options = {});

/// sup over (u, t) of |W_recorded - W_integrated| where dW/dt = h(W) is
/// integrated by RK4 from each W(0) on the recorded time grid.
double w_dynamics_residual(const ShiftRecord& rec, const GeneratingScalar& gs);

/// For each recorded time, max_u W - min_u W.
std::vector<double> surface_constancy_residual(const ShiftRecord& rec);

/// max over (u, t, k) of |phi_k| / (|v| |tau_k|_g) at centrally stencilled
/// grid points; `from_time` skips earlier samples.
double max_normalized_deviation(const ShiftRecord& rec, double from_time = 0.0,
                                bool include_edges = false);

/// sup over trajectories and times of |d|v|/dt - N^i F_i|, the time derivative
/// taken by a fourth-order stencil on the recorded speeds.
double speed_law_residual(const ShiftRecord& rec, const GeneratingScalar& gs,
                          const MetricField& m);

}  // namespace nshift
