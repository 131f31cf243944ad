#include <gtest/gtest.h>

#include <cmath>

#include "nshift/cli/expression.hpp"

using nshift::cli::ConfigError;
using nshift::cli::Expression;

namespace {

// Layout (x1, x2, x3, v, w).
std::vector<double> at(double x1, double x2, double x3, double v = 0.0, double w = 0.0) {
  return {x1, x2, x3, v, w};
}

}  // namespace

TEST(Expression, Arithmetic) {
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 2*3", 3).eval(at(0, 0, 0)), 7.0);
  EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2)*3", 3).eval(at(0, 0, 0)), 9.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3^2", 3).eval(at(0, 0, 0)), 512.0);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2", 3).eval(at(0, 0, 0)), -4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("8/4/2", 3).eval(at(0, 0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1.5e-1 * 2", 3).eval(at(0, 0, 0)), 0.3);
  EXPECT_DOUBLE_EQ(Expression::parse("2*pi", 3).eval(at(0, 0, 0)), 2.0 * M_PI);
}

TEST(Expression, VariablesAndFunctions) {
  const Expression e = Expression::parse("x1*exp(-x2) + sin(x3)/v - log(w) + sqrt(v)", 3);
  const double expected = 0.5 * std::exp(-0.25) + std::sin(1.5) / 2.0 - std::log(3.0) + std::sqrt(2.0);
  EXPECT_NEAR(e.eval(at(0.5, 0.25, 1.5, 2.0, 3.0)), expected, 1e-15);
  EXPECT_TRUE(e.depends_on(0));
  EXPECT_TRUE(e.depends_on(e.v_index()));
  EXPECT_TRUE(e.depends_on(e.w_index()));
  EXPECT_FALSE(Expression::parse("x1 + v", 3).depends_on(1));
  EXPECT_EQ(e.text(), "x1*exp(-x2) + sin(x3)/v - log(w) + sqrt(v)");
  EXPECT_EQ(e.dim(), 3);
}

TEST(Expression, DerivativesMatchFiniteDifferences) {
  const Expression e = Expression::parse("x1^2*cos(x2*v) + exp(x3)/sqrt(v) + v^x1 - w^3 + 1/(1 + x2^2)", 3);
  const std::vector<double> p = at(0.7, -0.4, 0.3, 1.6, 0.9);
  for (int k = 0; k < 5; ++k) {
    std::vector<double> hi = p, lo = p;
    const double h = 1e-5;
    hi[k] += h;
    lo[k] -= h;
    const double fd = (e.eval(hi) - e.eval(lo)) / (2 * h);
    EXPECT_NEAR(e.derivative(k).eval(p), fd, 1e-8) << "variable " << k;
  }
}

TEST(Expression, ClosedFormDerivatives) {
  const Expression e = Expression::parse("v*exp(-x1)", 3);
  EXPECT_NEAR(e.derivative(0).eval(at(0.2, 0, 0, 1.5)), -1.5 * std::exp(-0.2), 1e-15);
  EXPECT_NEAR(e.derivative(3).eval(at(0.2, 0, 0, 1.5)), std::exp(-0.2), 1e-15);
  EXPECT_EQ(e.derivative(1).eval(at(0.2, 0, 0, 1.5)), 0.0);
  EXPECT_FALSE(e.derivative(1).depends_on(0));
  EXPECT_DOUBLE_EQ(Expression::parse("v^3", 3).derivative(3).eval(at(0, 0, 0, 2.0)), 12.0);
}

TEST(Expression, Constant) {
  const Expression c = Expression::constant(2.5, 4);
  EXPECT_DOUBLE_EQ(c.eval({0, 0, 0, 0, 0, 0}), 2.5);
  EXPECT_FALSE(c.empty());
  EXPECT_TRUE(Expression().empty());
}

TEST(Expression, Errors) {
  EXPECT_THROW(Expression::parse("x4", 3), ConfigError);
  EXPECT_THROW(Expression::parse("x0", 3), ConfigError);
  EXPECT_THROW(Expression::parse("1 +", 3), ConfigError);
  EXPECT_THROW(Expression::parse("(1 + 2", 3), ConfigError);
  EXPECT_THROW(Expression::parse("tan(x1)", 3), ConfigError);
  EXPECT_THROW(Expression::parse("y", 3), ConfigError);
  EXPECT_THROW(Expression::parse("", 3), ConfigError);
  EXPECT_THROW(Expression::parse("1 2", 3), ConfigError);
  EXPECT_THROW(Expression::parse("w + 1", 3, "xv"), ConfigError);
  EXPECT_THROW(Expression::parse("x1", 3, "vw"), ConfigError);
  EXPECT_NO_THROW(Expression::parse("v*x2", 3, "xv"));
}
