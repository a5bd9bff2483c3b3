#pragma once

#include <Eigen/Dense>

#include "specemu/errors.hpp"

namespace specemu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Matern-5/2 kernel parameters. The caller feeds *squared* Euclidean
// distances into the kernel argument d; the matrix builders below do this
// for you.
struct MaternParams {
  double lengthscale = 1.0;  // theta
  double scale = 1.0;        // sigma^2
  double jitter = 1e-8;      // added to diagonals

  void validate() const {
    if (!(lengthscale > 0.0)) throw InvalidParameter("MaternParams: lengthscale must be > 0");
    if (!(scale > 0.0)) throw InvalidParameter("MaternParams: scale must be > 0");
    if (jitter < 0.0) throw InvalidParameter("MaternParams: jitter must be >= 0");
  }
};

// Power-exponential correlation parameters over p_psi input dimensions.
struct PowExpParams {
  Vector beta;          // log10 inverse-lengthscales, one per dimension
  double alpha = 1.95;  // exponent, 0 < alpha <= 2
  double scale = 1.0;   // sigma^2
  double nugget = 0.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidParameter("PowExpParams: alpha must be in (0, 2]");
    if (!(scale > 0.0)) throw InvalidParameter("PowExpParams: scale must be > 0");
    if (nugget < 0.0) throw InvalidParameter("PowExpParams: nugget must be >= 0");
  }
};

// K(d, theta) = (1 + sqrt(5) d / sqrt(theta) + 5 d^2 / (3 theta)) exp(-sqrt(5) d / sqrt(theta))
// with d >= 0 the squared input distance. Underflow is flushed to 0.
double matern52(double d, double theta);

// Entry (i, j) = scale * matern52((p_i - p_j)^2, theta) + jitter * 1[i == j].
// Serial reference kept for testing the parallel builder against.
Matrix matern52_matrix_serial(const Vector& points, const MaternParams& params);
// OpenMP-parallel over rows; output identical to the serial builder.
Matrix matern52_matrix(const Vector& points, const MaternParams& params);

// Cross-covariance (no jitter): entry (i, j) = scale * matern52((a_i - b_j)^2, theta).
Matrix matern52_cross(const Vector& a, const Vector& b, const MaternParams& params);

// R^{u,v} = prod_j exp(-10^{beta_j} |psi_uj - psi_vj|^alpha), in (0, 1].
double powexp_corr(const Vector& psi_u, const Vector& psi_v, const PowExpParams& params);

// m x m correlation matrix over the rows of psi, plus nugget on the diagonal.
Matrix powexp_corr_matrix_serial(const Matrix& psi, const PowExpParams& params);
Matrix powexp_corr_matrix(const Matrix& psi, const PowExpParams& params);

// Correlations between one test input and each training row.
Vector powexp_corr_vector(const Matrix& psi_train, const Vector& psi_star,
                          const PowExpParams& params);

}  // namespace specemu
