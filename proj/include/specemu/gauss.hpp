#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specemu/errors.hpp"
#include "specemu/kernels.hpp"
#include "specemu/rng.hpp"

namespace specemu {

struct JitterPolicy {
  double initial = 1e-8;
  double max = 1e-4;
  double factor = 10.0;
};

// Cholesky with jitter escalation. Returns the lower factor of
// cov + applied_jitter * I. `role` names the matrix in error messages.
Matrix chol(const Matrix& cov, const JitterPolicy& policy = {},
            const std::string& role = "covariance", double* applied_jitter = nullptr);

// Multivariate normal with a cached lower-triangular factor.
class GaussianDist {
 public:
  GaussianDist(Vector mean, Matrix cov, const JitterPolicy& policy = {},
               const std::string& role = "covariance");

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Matrix& factor() const { return factor_; }
  double applied_jitter() const { return applied_jitter_; }
  Eigen::Index dim() const { return mean_.size(); }

  double logpdf(const Vector& y) const;
  // samples = mean + L z, z standard normal; deterministic for a fixed rng state
  std::vector<Vector> sample(Rng& rng, int count) const;

 private:
  Vector mean_;
  Matrix cov_;
  Matrix factor_;
  double applied_jitter_ = 0.0;
};

double mvn_logpdf(const Vector& y, const GaussianDist& dist);

// Distribution of the first block given the observed second block of a
// joint Gaussian over (n + n) coordinates. Brute-force conditioning used as
// the oracle for the closed-form posterior.
GaussianDist condition_joint(const Vector& joint_mean, const Matrix& joint_cov,
                             const Vector& observed);

struct ScoreReport {
  double log_score = 0.0;
  double mse = 0.0;
};

// Negative log predictive Gaussian density; lower is better.
double log_score(const Vector& y_true, const GaussianDist& pred);

double mse(const Vector& a, const Vector& b);

}  // namespace specemu
