#include "specemu/kernels.hpp"

#include <cmath>
#include <limits>

namespace specemu {

namespace {
constexpr double kSqrt5 = 2.23606797749978969640917366873;
}

double matern52(double d, double theta) {
  if (!(theta > 0.0)) throw InvalidParameter("matern52: theta must be > 0");
  if (d < 0.0) throw InvalidParameter("matern52: d must be >= 0");
  // d is the squared Euclidean distance; u = sqrt(5 d / theta) is the
  // scaled distance, giving the standard (positive-definite) Matern-5/2
  const double u = std::sqrt(5.0 * d / theta);
  const double v = (1.0 + u + 5.0 * d / (3.0 * theta)) * std::exp(-u);
  // flush subnormals so matrices are bit-reproducible across platforms
  if (v < std::numeric_limits<double>::min()) return 0.0;
  return v;
}

Matrix matern52_matrix_serial(const Vector& points, const MaternParams& params) {
  params.validate();
  const Eigen::Index n = points.size();
  if (n < 1) throw InvalidParameter("matern52_matrix: need at least one point");
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = params.scale + params.jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double delta = points(i) - points(j);
      const double val = params.scale * matern52(delta * delta, params.lengthscale);
      out(i, j) = val;
      out(j, i) = val;
    }
  }
  return out;
}

Matrix matern52_matrix(const Vector& points, const MaternParams& params) {
  params.validate();
  const Eigen::Index n = points.size();
  if (n < 1) throw InvalidParameter("matern52_matrix: need at least one point");
  Matrix out(n, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = params.scale + params.jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double delta = points(i) - points(j);
      out(i, j) = params.scale * matern52(delta * delta, params.lengthscale);
    }
  }
  // mirror the strict lower triangle; rows were filled independently
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) out(j, i) = out(i, j);
  return out;
}

Matrix matern52_cross(const Vector& a, const Vector& b, const MaternParams& params) {
  params.validate();
  Matrix out(a.size(), b.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const double delta = a(i) - b(j);
      out(i, j) = params.scale * matern52(delta * delta, params.lengthscale);
    }
  return out;
}

double powexp_corr(const Vector& psi_u, const Vector& psi_v, const PowExpParams& params) {
  params.validate();
  if (psi_u.size() != params.beta.size() || psi_v.size() != params.beta.size())
    throw DimensionMismatch("powexp_corr: input dimension does not match beta");
  double log_r = 0.0;
  for (Eigen::Index j = 0; j < params.beta.size(); ++j) {
    const double d = std::abs(psi_u(j) - psi_v(j));
    log_r -= std::pow(10.0, params.beta(j)) * std::pow(d, params.alpha);
  }
  const double r = std::exp(log_r);
  if (r < std::numeric_limits<double>::min()) return 0.0;
  return r;
}

Matrix powexp_corr_matrix_serial(const Matrix& psi, const PowExpParams& params) {
  const Eigen::Index m = psi.rows();
  Matrix out(m, m);
  for (Eigen::Index u = 0; u < m; ++u) {
    out(u, u) = 1.0 + params.nugget;
    for (Eigen::Index v = 0; v < u; ++v) {
      const double r = powexp_corr(psi.row(u), psi.row(v), params);
      out(u, v) = r;
      out(v, u) = r;
    }
  }
  return out;
}

Matrix powexp_corr_matrix(const Matrix& psi, const PowExpParams& params) {
  params.validate();
  if (psi.cols() != params.beta.size())
    throw DimensionMismatch("powexp_corr_matrix: input dimension does not match beta");
  const Eigen::Index m = psi.rows();
  Matrix out(m, m);
#pragma omp parallel for schedule(static)
  for (Eigen::Index u = 0; u < m; ++u) {
    out(u, u) = 1.0 + params.nugget;
    for (Eigen::Index v = 0; v < u; ++v)
      out(u, v) = powexp_corr(psi.row(u), psi.row(v), params);
  }
  for (Eigen::Index u = 0; u < m; ++u)
    for (Eigen::Index v = 0; v < u; ++v) out(v, u) = out(u, v);
  return out;
}

Vector powexp_corr_vector(const Matrix& psi_train, const Vector& psi_star,
                          const PowExpParams& params) {
  Vector r(psi_train.rows());
  for (Eigen::Index j = 0; j < psi_train.rows(); ++j)
    r(j) = powexp_corr(psi_train.row(j), psi_star, params);
  return r;
}

}  // namespace specemu
