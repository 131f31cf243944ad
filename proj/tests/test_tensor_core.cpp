#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nshift/error.hpp"
#include "nshift/tensor_core.hpp"
#include "test_support.hpp"

using namespace nshift;
using nshift::test::sup;

namespace {

// Independent Christoffel reference: plain Levi-Civita sum over a finite
// difference of g with a fixed second-order stencil.
std::vector<Matrix> reference_christoffel(const MetricField& m, const Coords& x) {
  const int n = m.dim;
  const double h = 1e-4;
  std::vector<Matrix> dg(n);
  for (int k = 0; k < n; ++k) {
    Coords p = x, q = x;
    p[k] += h;
    q[k] -= h;
    dg[k] = (m.g(p) - m.g(q)) / (2 * h);
  }
  const Matrix ginv = m.g(x).inverse();
  std::vector<Matrix> gamma(n, Matrix::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int l = 0; l < n; ++l) s += ginv(k, l) * (dg[i](l, j) + dg[j](i, l) - dg[l](i, j));
        gamma[k](i, j) = 0.5 * s;
      }
  return gamma;
}

}  // namespace

TEST(MetricAt, EuclideanIsIdentity) {
  const MetricField m = MetricField::euclidean(3);
  Coords x(3);
  x << 4.0, -2.0, 0.1;
  EXPECT_EQ(metric_at(m, x), Matrix::Identity(3, 3));
}

TEST(MetricAt, ConformalWithZeroFunctionIsIdentity) {
  const MetricField m = MetricField::conformal(3, [](const Coords&) { return 0.0; });
  EXPECT_EQ(metric_at(m, Coords::Constant(3, 0.7)), Matrix::Identity(3, 3));
}

TEST(MetricAt, ConformalScalesByExponential) {
  const MetricField m = test::conformal_x1();
  Coords x(3);
  x << 0.3, 0.0, 0.0;
  // e^{-0.6}, evaluated independently
  const double expected = 0.54881163609402643263;
  EXPECT_NEAR(sup(metric_at(m, x) - expected * Matrix::Identity(3, 3)), 0.0, 1e-15);
}

TEST(MetricAt, SymmetrisesRoundingAsymmetry) {
  MetricField m;
  m.dim = 2;
  m.g = [](const Coords&) {
    Matrix g(2, 2);
    g << 2.0, 0.5 + 1e-14, 0.5, 1.0;
    return g;
  };
  const Matrix g = metric_at(m, Coords::Zero(2));
  EXPECT_EQ(g(0, 1), g(1, 0));
}

TEST(MetricAt, RejectsAsymmetricMetric) {
  MetricField m;
  m.dim = 2;
  m.g = [](const Coords&) {
    Matrix g(2, 2);
    g << 2.0, 0.6, 0.5, 1.0;
    return g;
  };
  try {
    metric_at(m, Coords::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AsymmetricMetric);
  }
}

TEST(MetricAt, RejectsIndefiniteMetric) {
  MetricField m;
  m.dim = 2;
  m.g = [](const Coords&) {
    Matrix g(2, 2);
    g << 1.0, 0.0, 0.0, -1.0;
    return g;
  };
  try {
    metric_at(m, Coords::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(MetricAt, RejectsWrongDimension) {
  try {
    metric_at(MetricField::euclidean(3), Coords::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(InverseMetric, ConformalIsReciprocal) {
  const MetricField m = test::conformal_x1();
  Coords x(3);
  x << -0.4, 1.0, 2.0;
  EXPECT_NEAR(sup(inverse_metric_at(m, x) - std::exp(-0.8) * Matrix::Identity(3, 3)), 0.0, 1e-14);
}

TEST(InverseMetric, RandomSpdMultipliesBackToIdentity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix g = test::random_spd(rng, 3);
    const MetricField m = test::constant_metric(g);
    const Matrix ginv = inverse_metric_at(m, Coords::Zero(3));
    EXPECT_LT(sup(g * ginv - Matrix::Identity(3, 3)), 1e-12);
  }
}

TEST(Christoffel, EuclideanVanishes) {
  const Christoffel c = christoffel_at(MetricField::euclidean(3), Coords::Constant(3, 0.2));
  for (const auto& g : c.gamma) EXPECT_EQ(sup(g), 0.0);
}

TEST(Christoffel, ConformalClosedForm) {
  const MetricField m = test::conformal_x1();
  Coords x(3);
  x << 0.5, -0.3, 1.2;
  const Christoffel c = christoffel_at(m, x);
  // -d_i f delta^k_j - d_j f delta^k_i + delta_ij d_k f, with df = e_1
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double di = i == 0, dj = j == 0, dk = k == 0;
        const double expected = -di * (k == j) - dj * (k == i) + (i == j) * dk;
        EXPECT_NEAR(c(k, i, j), expected, 1e-14) << k << i << j;
      }
}

TEST(Christoffel, DiagonalMetricHandValues) {
  const MetricField m = test::diagonal_x1sq();
  Coords x(3);
  x << 2.0, 0.4, -1.0;
  const Christoffel c = christoffel_at(m, x);
  EXPECT_NEAR(c(1, 0, 1), 0.5, 1e-14);
  EXPECT_NEAR(c(1, 1, 0), 0.5, 1e-14);
  EXPECT_NEAR(c(0, 1, 1), -2.0, 1e-14);
  double others = 0.0;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const bool listed = (k == 1 && i + j == 1) || (k == 0 && i == 1 && j == 1);
        if (!listed) others = std::max(others, std::abs(c(k, i, j)));
      }
  EXPECT_EQ(others, 0.0);

  const auto ref = reference_christoffel(m, x);
  for (int k = 0; k < 3; ++k) EXPECT_LT(sup(c.gamma[k] - ref[k]), 1e-7);
}

TEST(Christoffel, LowerIndexSymmetryIsExact) {
  const MetricField m = test::skewed();
  const Christoffel c = christoffel_at(m, Coords::Constant(3, 0.35));
  for (const auto& g : c.gamma) EXPECT_EQ(g, g.transpose());
}

TEST(Christoffel, FiniteDifferencesMatchAnalytic) {
  MetricField analytic = test::diagonal_x1sq();
  MetricField numeric = analytic;
  numeric.dg = nullptr;
  MetricField conf = test::conformal_x1();
  MetricField conf_fd = conf;
  conf_fd.dg = nullptr;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const Coords x = test::random_vector(rng, 3, 0.5, 2.0);
    const Christoffel a = christoffel_at(analytic, x), b = christoffel_at(numeric, x);
    const Christoffel c = christoffel_at(conf, x), d = christoffel_at(conf_fd, x);
    for (int k = 0; k < 3; ++k) {
      EXPECT_LT(sup(a.gamma[k] - b.gamma[k]), 1e-6);
      EXPECT_LT(sup(c.gamma[k] - d.gamma[k]), 1e-6);
    }
  }
}

TEST(Christoffel, ContractMatchesComponentSum) {
  const MetricField m = test::skewed();
  const Christoffel c = christoffel_at(m, Coords::Constant(3, 0.1));
  Vector a(3), b(3);
  a << 1.0, -2.0, 0.5;
  b << 0.3, 0.2, -1.0;
  const Vector k = c.contract(a, b);
  for (int r = 0; r < 3; ++r) {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += c(r, i, j) * a[i] * b[j];
    EXPECT_NEAR(k[r], s, 1e-14);
  }
}

TEST(UnitDirection, AxisVelocity) {
  Velocity v(3);
  v << 2.0, 0.0, 0.0;
  const Projector p = unit_direction(MetricField::euclidean(3), Coords::Zero(3), v);
  EXPECT_DOUBLE_EQ(p.speed, 2.0);
  EXPECT_EQ(p.N_up, Vector::Unit(3, 0));
  Matrix expected = Matrix::Identity(3, 3);
  expected(0, 0) = 0.0;
  EXPECT_LT(sup(p.P - expected), 1e-15);
}

TEST(UnitDirection, DiagonalVelocityIsIdempotent) {
  Velocity v(3);
  v << 1.0, 1.0, 0.0;
  const Projector p = unit_direction(MetricField::euclidean(3), Coords::Zero(3), v);
  EXPECT_NEAR(p.N_up[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(p.N_up[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_LT((p.P * p.N_up).norm(), 1e-15);
  EXPECT_LT(sup(p.P * p.P - p.P), 1e-15);
}

TEST(UnitDirection, ConformalSpeed) {
  Coords x(3);
  x << 1.0, 0.0, 0.0;
  Velocity v(3);
  v << 1.0, 0.0, 0.0;
  const Projector p = unit_direction(test::conformal_x1(), x, v);
  EXPECT_NEAR(p.speed, std::exp(-1.0), 1e-15);
  EXPECT_NEAR(p.N_up[0], std::exp(1.0), 1e-14);
}

TEST(UnitDirection, RejectsZeroVelocity) {
  try {
    unit_direction(MetricField::euclidean(3), Coords::Zero(3), Velocity::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVelocity);
  }
}

TEST(UnitDirection, ProjectorInvariantsOnCurvedMetrics) {
  std::mt19937_64 rng(11);
  const std::vector<MetricField> metrics = {test::conformal_x1(), test::diagonal_x1sq(), test::skewed()};
  for (const auto& m : metrics) {
    for (int trial = 0; trial < 50; ++trial) {
      const Coords x = test::random_vector(rng, 3, 0.5, 1.5);
      const Velocity v = test::random_vector(rng, 3, -2.0, 2.0);
      const Projector p = unit_direction(m, x, v);
      const Matrix g = metric_at(m, x);
      EXPECT_LT(sup(p.P * p.P - p.P), 1e-10);
      EXPECT_NEAR(p.P.trace(), 2.0, 1e-10);
      EXPECT_NEAR(p.N_up.dot(g * p.N_up), 1.0, 1e-10);
      EXPECT_LT((p.P * p.N_up).norm(), 1e-10);
      EXPECT_LT((p.N_down - g * p.N_up).norm(), 1e-12);
    }
  }
}

TEST(IndexMaps, EuclideanIdentityAndConformalScaling) {
  Vector w(3);
  w << 1.0, 2.0, 3.0;
  EXPECT_EQ(lower_index(MetricField::euclidean(3), Coords::Zero(3), w), w);
  Coords x(3);
  x << 0.25, 0.0, 0.0;
  EXPECT_LT((lower_index(test::conformal_x1(), x, w) - std::exp(-0.5) * w).norm(), 1e-15);
}

TEST(IndexMaps, RoundTripOnRandomSpd) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const MetricField m = test::constant_metric(test::random_spd(rng, 4));
    const Vector w = test::random_vector(rng, 4, -3.0, 3.0);
    const Vector back = raise_index(m, Coords::Zero(4), lower_index(m, Coords::Zero(4), w));
    EXPECT_LT((back - w).cwiseAbs().maxCoeff(), 1e-10);
  }
}
