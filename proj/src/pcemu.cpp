#include "specemu/pcemu.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace specemu {

InputNormalization InputNormalization::fit(const Matrix& psi) {
  InputNormalization norm;
  norm.lo = psi.colwise().minCoeff();
  norm.hi = psi.colwise().maxCoeff();
  for (Eigen::Index j = 0; j < norm.lo.size(); ++j)
    if (norm.hi(j) <= norm.lo(j)) norm.hi(j) = norm.lo(j) + 1.0;  // constant column
  return norm;
}

Matrix InputNormalization::apply(const Matrix& psi) const {
  Matrix out = psi;
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    out.col(j) = (psi.col(j).array() - lo(j)) / (hi(j) - lo(j));
  return out;
}

Vector InputNormalization::apply(const Vector& psi) const {
  return (psi - lo).cwiseQuotient(hi - lo);
}

Matrix InputNormalization::invert(const Matrix& unit) const {
  Matrix out = unit;
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    out.col(j) = unit.col(j).array() * (hi(j) - lo(j)) + lo(j);
  return out;
}

PCBasis build_basis(const Matrix& curves, int n_components) {
  const Eigen::Index m = curves.rows();
  const Eigen::Index n = curves.cols();
  if (m < 2) throw InvalidParameter("build_basis: need at least 2 curves");
  if (n_components < 1) throw InvalidParameter("build_basis: need at least 1 component");

  PCBasis pc;
  pc.mean_curve = curves.colwise().mean();
  // eta is n x m: one centered curve per column
  Matrix eta(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    eta.col(j) = curves.row(j).transpose() - pc.mean_curve;

  Eigen::BDCSVD<Matrix> svd(eta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  pc.singular_values = svd.singularValues();

  // numerical rank; components past it carry no signal
  const double tol = pc.singular_values.size() > 0
                         ? pc.singular_values(0) * 1e-12 * std::max(m, n)
                         : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < pc.singular_values.size(); ++i)
    if (pc.singular_values(i) > tol) ++rank;
  rank = std::max<Eigen::Index>(rank, 1);

  Eigen::Index p = std::min<Eigen::Index>(n_components, std::min(m, n));
  if (p > rank) {
    std::cerr << "build_basis: requested " << n_components << " components, truncating to rank "
              << rank << "\n";
    p = rank;
  }
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  pc.basis = svd.matrixU().leftCols(p) * pc.singular_values.head(p).asDiagonal() / sqrt_m;
  pc.weights = sqrt_m * svd.matrixV().leftCols(p);
  pc.retained = static_cast<int>(p);
  return pc;
}

namespace {
double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

// profile negative log-likelihood; sigma^2 closed form
double weight_gp_nll(const Matrix& psi, const Vector& gamma, const Vector& beta,
                     double nugget) {
  PowExpParams params;
  params.beta = beta;
  params.nugget = nugget;
  const Matrix corr = powexp_corr_matrix(psi, params);
  Eigen::LLT<Matrix> llt(corr);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Matrix factor = llt.matrixL();
  const double m = static_cast<double>(gamma.size());
  const Vector alpha = factor.triangularView<Eigen::Lower>().solve(gamma);
  const double scale = std::max(alpha.squaredNorm() / m, nugget);
  const double logdet = 2.0 * factor.diagonal().array().log().sum();
  return 0.5 * (m * std::log(scale) + logdet);
}
}  // namespace

WeightGp fit_weight_gp(const Matrix& psi_unit, const Vector& gamma, int component,
                       double nugget) {
  const Eigen::Index m = psi_unit.rows();
  const Eigen::Index p = psi_unit.cols();
  if (gamma.size() != m) throw DimensionMismatch("fit_weight_gp: gamma length mismatch");
  if (m < 2) throw InvalidParameter("fit_weight_gp: need at least 2 training points");

  constexpr double kLo = -3.0, kHi = 3.0;
  constexpr int kBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

  auto clamp_box = [&](Vector& beta) {
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      beta(j) = std::clamp(beta(j), kLo, kHi);
  };

  const int n_starts = 5 * static_cast<int>(p);
  Vector best_beta = Vector::Zero(p);
  double best_nll = std::numeric_limits<double>::infinity();

  for (int s = 0; s < n_starts; ++s) {
    Vector beta(p);
    for (Eigen::Index j = 0; j < p; ++j)
      beta(j) = kLo + (kHi - kLo) * halton(s + 1, kBases[j % 10]);

    double nll = weight_gp_nll(psi_unit, gamma, beta, nugget);
    if (!std::isfinite(nll)) continue;

    // gradient descent with central differences and backtracking
    double step = 0.5;
    for (int it = 0; it < 60 && step > 1e-6; ++it) {
      Vector grad(p);
      const double h = 1e-4;
      for (Eigen::Index j = 0; j < p; ++j) {
        Vector bp = beta, bm = beta;
        bp(j) += h;
        bm(j) -= h;
        clamp_box(bp);
        clamp_box(bm);
        grad(j) = (weight_gp_nll(psi_unit, gamma, bp, nugget) -
                   weight_gp_nll(psi_unit, gamma, bm, nugget)) /
                  (bp(j) - bm(j));
      }
      const double gnorm = grad.norm();
      if (!(gnorm > 1e-10)) break;
      bool moved = false;
      while (step > 1e-6) {
        Vector trial = beta - step * grad / gnorm;
        clamp_box(trial);
        const double trial_nll = weight_gp_nll(psi_unit, gamma, trial, nugget);
        if (std::isfinite(trial_nll) && trial_nll < nll - 1e-12) {
          beta = trial;
          nll = trial_nll;
          step *= 1.5;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }

    if (nll < best_nll) {
      best_nll = nll;
      best_beta = beta;
    }
  }
  if (!std::isfinite(best_nll))
    throw FitFailure("fit_weight_gp: every start failed; best-so-far beta is the origin");

  WeightGp gp;
  gp.component = component;
  gp.inputs = psi_unit;
  gp.weights = gamma;
  gp.params.beta = best_beta;
  gp.params.nugget = nugget;
  const Matrix corr = powexp_corr_matrix(psi_unit, gp.params);
  gp.corr_factor = chol(corr, {nugget > 0 ? nugget : 1e-8, 1e-4, 10.0}, "weight GP correlation");
  const Vector alpha = gp.corr_factor.triangularView<Eigen::Lower>().solve(gamma);
  gp.params.scale = std::max(alpha.squaredNorm() / static_cast<double>(m), nugget);
  gp.kinv_weights =
      gp.corr_factor.transpose().triangularView<Eigen::Upper>().solve(alpha);
  return gp;
}

double predict_weight(const WeightGp& model, const Vector& psi_star_unit) {
  const Vector r = powexp_corr_vector(model.inputs, psi_star_unit, model.params);
  return r.dot(model.kinv_weights);
}

Vector predict_spectrum(const PCBasis& basis, const std::vector<WeightGp>& models,
                        const Vector& psi_star_unit) {
  if (static_cast<int>(models.size()) != basis.retained)
    throw DimensionMismatch("predict_spectrum: component count mismatch");
  Vector out = basis.mean_curve;
  for (int i = 0; i < basis.retained; ++i)
    out += predict_weight(models[static_cast<std::size_t>(i)], psi_star_unit) *
           basis.basis.col(i);
  return out;
}

}  // namespace specemu
