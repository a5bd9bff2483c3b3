#include "specemu/gauss.hpp"

#include <cmath>

namespace specemu {

namespace {
constexpr double kLog2Pi = 1.83787706640934548356065947281;
}

Matrix chol(const Matrix& cov, const JitterPolicy& policy, const std::string& role,
            double* applied_jitter) {
  if (cov.rows() != cov.cols()) throw DimensionMismatch("chol: matrix must be square (" + role + ")");
  double jit = 0.0;
  for (;;) {
    Matrix attempt = cov;
    if (jit > 0.0) attempt.diagonal().array() += jit;
    Eigen::LLT<Matrix> llt(attempt);
    if (llt.info() == Eigen::Success) {
      if (applied_jitter) *applied_jitter = jit;
      return llt.matrixL();
    }
    if (jit == 0.0 && policy.initial > 0.0) {
      jit = policy.initial;
    } else if (jit == 0.0 && cov.isZero(0.0)) {
      // degenerate point mass under a zero-jitter policy
      if (applied_jitter) *applied_jitter = 0.0;
      return Matrix::Zero(cov.rows(), cov.cols());
    } else if (jit > 0.0 && jit * policy.factor <= policy.max) {
      jit *= policy.factor;
    } else {
      throw SingularMatrix("chol: " + role + " not factorizable after jitter escalation to " +
                           std::to_string(policy.max));
    }
  }
}

GaussianDist::GaussianDist(Vector mean, Matrix cov, const JitterPolicy& policy,
                           const std::string& role)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw DimensionMismatch("GaussianDist: mean/cov dimension mismatch");
  factor_ = chol(cov_, policy, role, &applied_jitter_);
}

double GaussianDist::logpdf(const Vector& y) const {
  if (y.size() != mean_.size()) throw DimensionMismatch("logpdf: dimension mismatch");
  const Vector alpha = factor_.triangularView<Eigen::Lower>().solve(y - mean_);
  const double quad = alpha.squaredNorm();
  const double logdet = 2.0 * factor_.diagonal().array().log().sum();
  return -0.5 * (quad + logdet + static_cast<double>(mean_.size()) * kLog2Pi);
}

std::vector<Vector> GaussianDist::sample(Rng& rng, int count) const {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  Vector z(mean_.size());
  for (int s = 0; s < count; ++s) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    out.push_back(mean_ + factor_.triangularView<Eigen::Lower>() * z);
  }
  return out;
}

double mvn_logpdf(const Vector& y, const GaussianDist& dist) { return dist.logpdf(y); }

GaussianDist condition_joint(const Vector& joint_mean, const Matrix& joint_cov,
                             const Vector& observed) {
  const Eigen::Index n = observed.size();
  if (joint_mean.size() != 2 * n || joint_cov.rows() != 2 * n || joint_cov.cols() != 2 * n)
    throw DimensionMismatch("condition_joint: joint must be 2n over an n observation");
  const Matrix s11 = joint_cov.topLeftCorner(n, n);
  const Matrix s12 = joint_cov.topRightCorner(n, n);
  const Matrix s22 = joint_cov.bottomRightCorner(n, n);
  const Matrix l22 = chol(s22, {}, "observed-block covariance");
  // gain = s12 s22^{-1}
  const Matrix tmp = l22.triangularView<Eigen::Lower>().solve(s12.transpose());
  const Matrix gain_t = l22.transpose().triangularView<Eigen::Upper>().solve(tmp);
  const Vector mean =
      joint_mean.head(n) + gain_t.transpose() * (observed - joint_mean.tail(n));
  Matrix cov = s11 - s12 * gain_t;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianDist(mean, cov, {}, "conditional covariance");
}

double log_score(const Vector& y_true, const GaussianDist& pred) {
  return -pred.logpdf(y_true);
}

double mse(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("mse: dimension mismatch");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace specemu
