#include "nshift/tensor_core.hpp"

#include <cmath>
#include <string>

#include "nshift/error.hpp"
#include "nshift/numeric/diff.hpp"

namespace nshift {

namespace {

constexpr double kSymmetryTolerance = 1e-12;

void check_dim(const MetricField& m, const Vector& x, const char* what) {
  if (x.size() != m.dim) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " has " + std::to_string(x.size()) +
                    " components, chart dimension is " + std::to_string(m.dim));
  }
}

// Raw metric evaluation without the positive-definiteness check; used inside
// finite-difference stencils where the factorisation would be wasted work.
Matrix symmetrised_metric(const MetricField& m, const Coords& x) {
  Matrix g = m.g(x);
  if (g.rows() != m.dim || g.cols() != m.dim) {
    throw Error(ErrorCode::DimensionMismatch, "metric closure returned wrong shape");
  }
  if (!g.allFinite()) throw Error(ErrorCode::EvaluationFailure, "metric is not finite");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw Error(ErrorCode::AsymmetricMetric,
                "asymmetry " + std::to_string(asym) + " exceeds tolerance");
  }
  return 0.5 * (g + g.transpose());
}

}  // namespace

MetricField MetricField::euclidean(int dim) {
  MetricField m;
  m.dim = dim;
  m.g = [dim](const Coords&) { return Matrix::Identity(dim, dim); };
  m.dg = [dim](const Coords&) { return std::vector<Matrix>(dim, Matrix::Zero(dim, dim)); };
  return m;
}

MetricField MetricField::conformal(int dim, std::function<double(const Coords&)> f,
                                   std::function<Vector(const Coords&)> grad_f) {
  MetricField m;
  m.dim = dim;
  m.g = [dim, f](const Coords& x) {
    return (std::exp(-2.0 * f(x)) * Matrix::Identity(dim, dim)).eval();
  };
  if (grad_f) {
    m.dg = [dim, f, grad_f](const Coords& x) {
      const double factor = std::exp(-2.0 * f(x));
      const Vector df = grad_f(x);
      std::vector<Matrix> out(dim);
      for (int k = 0; k < dim; ++k) out[k] = (-2.0 * df[k] * factor) * Matrix::Identity(dim, dim);
      return out;
    };
  }
  return m;
}

MetricField MetricField::diagonal(int dim, std::function<Vector(const Coords&)> entries,
                                  std::function<Matrix(const Coords&)> grad_entries) {
  MetricField m;
  m.dim = dim;
  m.g = [entries](const Coords& x) { return Matrix(entries(x).asDiagonal()); };
  if (grad_entries) {
    m.dg = [dim, grad_entries](const Coords& x) {
      const Matrix grads = grad_entries(x);
      std::vector<Matrix> out(dim, Matrix::Zero(dim, dim));
      for (int k = 0; k < dim; ++k) {
        for (int i = 0; i < dim; ++i) out[k](i, i) = grads(i, k);
      }
      return out;
    };
  }
  return m;
}

Vector Christoffel::contract(const Vector& a, const Vector& b) const {
  Vector out(dim());
  for (int k = 0; k < dim(); ++k) out[k] = a.dot(gamma[k] * b);
  return out;
}

Matrix metric_at(const MetricField& m, const Coords& x) {
  check_dim(m, x, "coordinate vector");
  Matrix g = symmetrised_metric(m, x);
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorisation of g failed");
  }
  return g;
}

Matrix inverse_metric_at(const MetricField& m, const Coords& x) {
  const Matrix g = metric_at(m, x);
  Eigen::LLT<Matrix> llt(g);
  Matrix inv = llt.solve(Matrix::Identity(m.dim, m.dim));
  return 0.5 * (inv + inv.transpose());
}

std::vector<Matrix> metric_derivatives_at(const MetricField& m, const Coords& x) {
  check_dim(m, x, "coordinate vector");
  if (m.dg) {
    std::vector<Matrix> out = m.dg(x);
    if (static_cast<int>(out.size()) != m.dim) {
      throw Error(ErrorCode::DimensionMismatch, "metric derivative closure returned wrong count");
    }
    for (auto& d : out) d = 0.5 * (d + d.transpose());
    return out;
  }
  std::vector<Matrix> out(m.dim);
  Coords y = x;
  for (int k = 0; k < m.dim; ++k) {
    out[k] = numeric::derivative(
        [&](double s) {
          y[k] = s;
          Matrix g = symmetrised_metric(m, y);
          y[k] = x[k];
          return g;
        },
        x[k], m.fd_step);
  }
  return out;
}

Christoffel christoffel_at(const MetricField& m, const Coords& x) {
  const Matrix ginv = inverse_metric_at(m, x);
  const std::vector<Matrix> dg = metric_derivatives_at(m, x);
  const int n = m.dim;

  // First-kind symbols Gamma_{s,ij} = (d_i g_sj + d_j g_is - d_s g_ij) / 2.
  std::vector<Matrix> first(n, Matrix::Zero(n, n));
  for (int s = 0; s < n; ++s) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        first[s](i, j) = 0.5 * (dg[i](s, j) + dg[j](i, s) - dg[s](i, j));
        first[s](j, i) = first[s](i, j);
      }
    }
  }

  Christoffel c;
  c.gamma.assign(n, Matrix::Zero(n, n));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double sum = 0.0;
        for (int s = 0; s < n; ++s) sum += ginv(k, s) * first[s](i, j);
        c.gamma[k](i, j) = sum;
        c.gamma[k](j, i) = sum;
      }
    }
  }
  return c;
}

double speed_of(const MetricField& m, const Coords& x, const Velocity& v) {
  check_dim(m, v, "velocity vector");
  const Matrix g = metric_at(m, x);
  return std::sqrt(v.dot(g * v));
}

Projector unit_direction(const MetricField& m, const Coords& x, const Velocity& v,
                         double speed_floor) {
  check_dim(m, v, "velocity vector");
  const Matrix g = metric_at(m, x);
  const double speed = std::sqrt(v.dot(g * v));
  if (!(speed > speed_floor)) {
    throw Error(ErrorCode::ZeroVelocity, "|v| = " + std::to_string(speed) + " at or below floor");
  }
  Projector p;
  p.speed = speed;
  p.N_up = v / speed;
  p.N_down = g * p.N_up;
  p.P = Matrix::Identity(m.dim, m.dim) - p.N_up * p.N_down.transpose();
  return p;
}

Covector lower_index(const MetricField& m, const Coords& x, const Vector& vec) {
  check_dim(m, vec, "vector");
  return metric_at(m, x) * vec;
}

Vector raise_index(const MetricField& m, const Coords& x, const Covector& cov) {
  check_dim(m, cov, "covector");
  const Matrix g = metric_at(m, x);
  return Eigen::LLT<Matrix>(g).solve(cov);
}

}  // namespace nshift
