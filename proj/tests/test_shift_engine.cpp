#include <gtest/gtest.h>

#include <cmath>

#include "nshift/error.hpp"
#include "nshift/shift_engine.hpp"
#include "test_support.hpp"

using namespace nshift;

namespace {

template <class Fn>
ErrorCode error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::NonFinite;
}

Vector u2(double a, double b) {
  Vector u(2);
  u << a, b;
  return u;
}

GridSpec square_grid(double lo, double hi, int count) {
  return GridSpec{Vector::Constant(2, lo), Vector::Constant(2, hi), {count, count}};
}

GeneratingScalar linear_generator() {
  GeneratingScalar gs;
  gs.W.eval = [](const Coords& x, double s) { return x[0] + s; };
  gs.W.dx = [](const Coords& x, double) -> Covector {
    Covector d = Covector::Zero(x.size());
    d[0] = 1.0;
    return d;
  };
  gs.W.dspeed = [](const Coords&, double) { return 1.0; };
  gs.h = [](double) { return 0.0; };
  return gs;
}

ForceField zero_force() {
  ForceField F;
  F.eval = [](const MetricField&, const Coords& x, const Velocity&) -> Covector {
    return Covector::Zero(x.size());
  };
  return F;
}

PhaseState integrate(const MetricField& m, PhaseState st, double t_end, int steps) {
  const ForceField F = zero_force();
  for (int i = 0; i < steps; ++i) st = step_trajectory(F, m, st, t_end / steps);
  return st;
}

}  // namespace

TEST(SurfaceNormal, PlaneAndOrientation) {
  Hypersurface s = Hypersurface::plane(3);
  const Vector n = surface_normal(MetricField::euclidean(3), s, u2(0.3, -0.4));
  EXPECT_NEAR(n[0], 0.0, 1e-15);
  EXPECT_NEAR(n[1], 0.0, 1e-15);
  EXPECT_NEAR(n[2], 1.0, 1e-15);
  s.orientation = -1;
  EXPECT_NEAR(surface_normal(MetricField::euclidean(3), s, u2(0.3, -0.4))[2], -1.0, 1e-15);
}

TEST(SurfaceNormal, SphereIsRadial) {
  Coords c(3);
  c << 0.1, -0.2, 0.3;
  const Hypersurface s = Hypersurface::sphere(c, 1.5);
  const MetricField m = MetricField::euclidean(3);
  for (const Vector& u : {u2(0.7, 1.2), u2(1.5, -0.4), u2(2.2, 3.0)}) {
    const Vector n = surface_normal(m, s, u);
    const Vector radial = (s.point(u) - c) / 1.5;
    EXPECT_LT((n - radial).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix tau = s.tangents(u);
    EXPECT_LT((tau.transpose() * n).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SurfaceNormal, SphereTangentsMatchChart) {
  Hypersurface exact = Hypersurface::sphere(Coords::Zero(4), 0.8);
  Hypersurface numeric = exact;
  numeric.du = nullptr;
  Vector u(3);
  u << 0.9, 1.3, -0.6;
  EXPECT_LT(test::sup(exact.tangents(u) - numeric.tangents(u)), 1e-8);
}

TEST(SurfaceNormal, ConformalRescaling) {
  const MetricField m = test::conformal_x1();
  const Hypersurface s = Hypersurface::plane(3);
  for (double u1 : {-0.5, 0.0, 0.8}) {
    const Vector n = surface_normal(m, s, u2(u1, 0.2));
    EXPECT_NEAR(n[2], std::exp(u1), 1e-12);
    EXPECT_NEAR(n[0], 0.0, 1e-14);
    const Matrix g = metric_at(m, s.point(u2(u1, 0.2)));
    EXPECT_NEAR(n.dot(g * n), 1.0, 1e-10);
  }
}

TEST(SurfaceNormal, GraphAndSkewedMetric) {
  const Hypersurface s = Hypersurface::graph(3, [](const Vector& u) { return 0.2 * u[0] * u[0] - 0.1 * u[1]; });
  const MetricField m = test::skewed();
  const Vector u = u2(0.4, 0.7);
  const Vector n = surface_normal(m, s, u);
  const Matrix g = metric_at(m, s.point(u));
  EXPECT_LT((s.tangents(u).transpose() * g * n).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(n.dot(g * n), 1.0, 1e-10);
}

TEST(SurfaceNormal, DegenerateTangents) {
  Hypersurface s;
  s.dim_u = 2;
  s.chart_map = [](const Vector& u) {
    Coords x(3);
    x << u[0] + u[1], u[0] + u[1], 0.0;
    return x;
  };
  s.base_u = Vector::Zero(2);
  EXPECT_EQ(error_of([&] { surface_normal(MetricField::euclidean(3), s, u2(0.1, 0.2)); }),
            ErrorCode::DegenerateTangents);
}

TEST(SolveNu, GeodesicKeepsNu0) {
  Hypersurface s = Hypersurface::plane(3);
  s.nu0 = -1.7;
  EXPECT_DOUBLE_EQ(solve_nu(builtin_geodesic(), test::conformal_x1(), s, u2(0.6, -0.3)), -1.7);
}

TEST(SolveNu, MetrizableClosedForm) {
  const GeneratingScalar gs = builtin_metrizable(test::f_x1(), [](double w) { return w; });
  const Hypersurface s = Hypersurface::plane(3);
  for (double u1 : {-1.2, -0.3, 0.0, 0.5, 1.4}) {
    const double nu = solve_nu(gs, MetricField::euclidean(3), s, u2(u1, 0.4));
    EXPECT_NEAR(nu, std::exp(u1), 1e-12 * std::exp(u1));
  }
  Hypersurface neg = s;
  neg.nu0 = -1.0;
  EXPECT_NEAR(solve_nu(gs, MetricField::euclidean(3), neg, u2(0.5, 0.0)), -std::exp(0.5), 1e-12);
}

TEST(SolveNu, ConstantOnLevelSurface) {
  Hypersurface s;
  s.dim_u = 2;
  s.chart_map = [](const Vector& u) {
    Coords x(3);
    x << 0.7, u[0], u[1];
    return x;
  };
  s.base_u = Vector::Zero(2);
  s.nu0 = 1.3;
  EXPECT_NEAR(solve_nu(linear_generator(), MetricField::euclidean(3), s, u2(0.4, -0.8)), 1.3, 1e-14);
}

TEST(SolveNu, RootNotBracketed) {
  // W0 = 1 at x1 = 0, while W = 2 + v exceeds it for every speed at x1 = 2.
  const Hypersurface s = Hypersurface::plane(3);
  EXPECT_EQ(error_of([&] { solve_nu(linear_generator(), MetricField::euclidean(3), s, u2(2.0, 0.0)); }),
            ErrorCode::RootNotBracketed);
}

TEST(StepTrajectory, StraightLine) {
  PhaseState st{Coords::Zero(3), Velocity::Unit(3, 0), 0.0};
  const PhaseState end = integrate(MetricField::euclidean(3), st, 2.0, 100);
  EXPECT_NEAR(end.x[0], 2.0, 1e-14);
  EXPECT_NEAR(end.x[1], 0.0, 1e-15);
  EXPECT_EQ(end.v, st.v);
  EXPECT_NEAR(end.t, 2.0, 1e-12);
}

TEST(StepTrajectory, FourthOrderOnCurvedMetric) {
  const MetricField m = test::diagonal_x1sq();
  Coords x(3);
  x << 1.0, 0.0, 0.0;
  Velocity v(3);
  v << 0.2, 0.8, 0.1;
  const PhaseState st{x, v, 0.0};
  const PhaseState a = integrate(m, st, 1.0, 20);
  const PhaseState b = integrate(m, st, 1.0, 40);
  const PhaseState c = integrate(m, st, 1.0, 80);
  const double e1 = (a.x - b.x).norm();
  const double e2 = (b.x - c.x).norm();
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.3);
  // The speed is conserved along geodesics.
  EXPECT_NEAR(speed_of(m, c.x, c.v), speed_of(m, x, v), 1e-9);
}

TEST(StepTrajectory, Errors) {
  const PhaseState st{Coords::Zero(3), Velocity::Zero(3), 0.0};
  EXPECT_EQ(error_of([&] { step_trajectory(zero_force(), MetricField::euclidean(3), st, 0.1); }),
            ErrorCode::ZeroVelocity);
  const PhaseState ok{Coords::Zero(3), Velocity::Ones(3), 0.0};
  EXPECT_EQ(error_of([&] { step_trajectory(zero_force(), MetricField::euclidean(3), ok, 0.0); }),
            ErrorCode::EvaluationFailure);
  ForceField huge;
  huge.eval = [](const MetricField&, const Coords&, const Velocity& v) -> Covector { return 1e300 * v; };
  EXPECT_EQ(error_of([&] { step_trajectory(huge, MetricField::euclidean(3), ok, 1e10); }), ErrorCode::NonFinite);
}

TEST(RunShift, BonnetPlanes) {
  const ShiftRecord rec = run_shift(builtin_geodesic(), MetricField::euclidean(3), Hypersurface::plane(3),
                                    square_grid(-0.2, 0.2, 9), 1.0, 1e-2);
  EXPECT_EQ(rec.trajectory_count(), 81u);
  EXPECT_EQ(rec.times.size(), 101u);
  EXPECT_NEAR(rec.times.back(), 1.0, 1e-12);
  EXPECT_LT(max_normalized_deviation(rec, 0.0, true), 1e-12);
  EXPECT_LT(w_dynamics_residual(rec, builtin_geodesic()), 1e-12);
  for (const auto& st : rec.states[40]) EXPECT_NEAR(st.x[2], st.t, 1e-12);
}

TEST(RunShift, GridEnumerationAndStride) {
  ShiftOptions opts;
  opts.sample_stride = 30;
  const ShiftRecord rec = run_shift(builtin_geodesic(), MetricField::euclidean(3), Hypersurface::plane(3),
                                    GridSpec{u2(0.0, 1.0), u2(0.4, 2.0), {5, 6}}, 1.0, 1e-2, opts);
  ASSERT_EQ(rec.trajectory_count(), 30u);
  EXPECT_DOUBLE_EQ(rec.u_grid[1][0], 0.1);
  EXPECT_DOUBLE_EQ(rec.u_grid[1][1], 1.0);
  EXPECT_DOUBLE_EQ(rec.u_grid[5][1], 1.2);
  // Steps 0, 30, 60, 90 and the final step 100.
  ASSERT_EQ(rec.times.size(), 5u);
  EXPECT_NEAR(rec.times[3], 0.9, 1e-12);
  EXPECT_NEAR(rec.times[4], 1.0, 1e-12);
  EXPECT_FALSE(rec.central[0]);
  EXPECT_TRUE(rec.central[2 + 5 * 2]);
}

TEST(RunShift, MetrizablePlaneStaysNormal) {
  const GeneratingScalar gs = builtin_metrizable(test::f_x1(), [](double) { return 0.0; });
  const ShiftRecord rec = run_shift(gs, MetricField::euclidean(3), Hypersurface::plane(3),
                                    square_grid(-0.2, 0.2, 9), 0.5, 1e-3, ShiftOptions{false, 10});
  EXPECT_LT(max_normalized_deviation(rec), 1e-6);
  EXPECT_LT(w_dynamics_residual(rec, gs), 1e-8);
  for (double spread : surface_constancy_residual(rec)) EXPECT_LT(spread, 1e-7);
  EXPECT_LT(surface_constancy_residual(rec)[0], 1e-12);
  EXPECT_LT(speed_law_residual(rec, gs, MetricField::euclidean(3)), 1e-5);
}

TEST(RunShift, ForcedConstantNuBreaksNormality) {
  const GeneratingScalar gs = builtin_metrizable(test::f_x1(), [](double) { return 0.0; });
  ShiftOptions opts;
  opts.force_constant_nu = true;
  opts.sample_stride = 50;
  const ShiftRecord rec = run_shift(gs, MetricField::euclidean(3), Hypersurface::plane(3),
                                    square_grid(-0.2, 0.2, 9), 0.5, 1e-3, opts);
  EXPECT_GT(max_normalized_deviation(rec), 1e-3);
  EXPECT_GT(surface_constancy_residual(rec).back(), 1e-3);
}

TEST(RunShift, WDynamics) {
  const PositionScalar f = test::f_x1();
  const GeneratingScalar unit = builtin_metrizable(f, [](double) { return 1.0; });
  const GeneratingScalar expo = builtin_metrizable(f, [](double w) { return w; });
  ShiftOptions opts{false, 10};
  for (const GeneratingScalar& gs : {unit, expo}) {
    const ShiftRecord rec = run_shift(gs, MetricField::euclidean(3), Hypersurface::plane(3),
                                      square_grid(-0.2, 0.2, 5), 1.0, 1e-3, opts);
    EXPECT_LT(w_dynamics_residual(rec, gs), 1e-6);
  }
  const ShiftRecord rec = run_shift(expo, MetricField::euclidean(3), Hypersurface::plane(3),
                                    square_grid(-0.2, 0.2, 5), 1.0, 1e-3, opts);
  for (std::size_t j = 0; j < rec.times.size(); ++j) {
    EXPECT_NEAR(rec.W_vals[3][j], rec.W_vals[3][0] * std::exp(rec.times[j]), 1e-6);
  }
}

TEST(RunShift, GridTooCoarse) {
  EXPECT_EQ(error_of([] {
              run_shift(builtin_geodesic(), MetricField::euclidean(3), Hypersurface::plane(3),
                        square_grid(0.0, 1.0, 4), 1.0, 0.1);
            }),
            ErrorCode::GridTooCoarse);
}

TEST(RunShift, TrajectoryEscaped) {
  ShiftOptions opts;
  opts.box_lo = Vector::Constant(3, -1.0);
  opts.box_hi = Vector::Constant(3, 0.5);
  EXPECT_EQ(error_of([&] {
              run_shift(builtin_geodesic(), MetricField::euclidean(3), Hypersurface::plane(3),
                        square_grid(-0.2, 0.2, 5), 1.0, 0.01, opts);
            }),
            ErrorCode::TrajectoryEscaped);
}

TEST(RunShift, DeterministicAcrossRuns) {
  const GeneratingScalar gs = builtin_metrizable(test::f_x1(), [](double w) { return w; });
  const Hypersurface s = Hypersurface::sphere(Coords::Zero(3), 1.0);
  const GridSpec grid = square_grid(M_PI / 2 - 0.1, M_PI / 2 + 0.1, 5);
  const ShiftRecord a = run_shift(gs, MetricField::euclidean(3), s, grid, 0.2, 1e-2);
  const ShiftRecord b = run_shift(gs, MetricField::euclidean(3), s, grid, 0.2, 1e-2);
  for (std::size_t id = 0; id < a.trajectory_count(); ++id) {
    EXPECT_EQ(a.states[id].back().x, b.states[id].back().x);
    EXPECT_EQ(a.phi[id].back(), b.phi[id].back());
  }
}
