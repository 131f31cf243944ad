#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nshift/types.hpp"

namespace nshift {

/// Riemannian metric g_ij on a single chart.
///
/// `g` must return a symmetric positive-definite n x n matrix. When `dg` is
/// supplied it returns the n coordinate derivatives: dg(x)[k](i, j) = d g_ij / d x^k.
/// Without `dg`, derivatives come from central differences with step `fd_step`
/// and one Richardson level.
struct MetricField {
  using MetricFn = std::function<Matrix(const Coords&)>;
  using DerivFn = std::function<std::vector<Matrix>(const Coords&)>;

  int dim = 3;
  MetricFn g;
  DerivFn dg;
  double fd_step = 1e-5;

  bool has_analytic_derivatives() const noexcept { return static_cast<bool>(dg); }

  /// Flat metric delta_ij.
  static MetricField euclidean(int dim);

  /// Conformally flat metric exp(-2 f(x)) delta_ij. Passing `grad_f` enables
  /// analytic metric derivatives.
  static MetricField conformal(int dim, std::function<double(const Coords&)> f,
                               std::function<Vector(const Coords&)> grad_f = {});

  /// Diagonal metric diag(d_1(x), ..., d_n(x)). `grad_entries`, when present,
  /// returns the n x n matrix whose row i is the gradient of d_i.
  static MetricField diagonal(int dim, std::function<Vector(const Coords&)> entries,
                              std::function<Matrix(const Coords&)> grad_entries = {});
};

/// Connection coefficients Gamma^k_ij stored as gamma[k](i, j).
struct Christoffel {
  std::vector<Matrix> gamma;

  double operator()(int k, int i, int j) const { return gamma[k](i, j); }
  int dim() const noexcept { return static_cast<int>(gamma.size()); }

  /// Contraction sum_ij Gamma^k_ij a^i b^j for every k.
  Vector contract(const Vector& a, const Vector& b) const;
};

/// Unit velocity direction and the orthogonal projector onto its complement.
struct Projector {
  Matrix P;         ///< mixed components P^i_k, row i, column k
  Vector N_up;      ///< N^i
  Vector N_down;    ///< N_i
  double speed = 0; ///< |v| in the metric
};

Matrix metric_at(const MetricField& m, const Coords& x);
Matrix inverse_metric_at(const MetricField& m, const Coords& x);

/// dg[k](i, j) = d g_ij / d x^k, analytic when available.
std::vector<Matrix> metric_derivatives_at(const MetricField& m, const Coords& x);

Christoffel christoffel_at(const MetricField& m, const Coords& x);

/// |v| = sqrt(g_ij v^i v^j).
double speed_of(const MetricField& m, const Coords& x, const Velocity& v);

Projector unit_direction(const MetricField& m, const Coords& x, const Velocity& v,
                         double speed_floor = kDefaultSpeedFloor);

Covector lower_index(const MetricField& m, const Coords& x, const Vector& vec);
Vector raise_index(const MetricField& m, const Coords& x, const Covector& cov);

}  // namespace nshift
