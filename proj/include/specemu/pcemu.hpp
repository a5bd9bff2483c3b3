#pragma once

#include <vector>

#include "specemu/gauss.hpp"
#include "specemu/kernels.hpp"

namespace specemu {

// SVD-derived principal-component basis over training curves.
// basis * weights^T reconstructs the centered training matrix exactly at
// full rank.
struct PCBasis {
  Vector mean_curve;       // n
  Matrix basis;            // n x p, columns ordered by descending singular value
  Matrix weights;          // m x p
  Vector singular_values;  // all of them, descending
  int retained = 0;        // p
};

// One fitted weight GP: zero-mean power-exponential GP regressing a PC
// weight on normalized cosmological parameters.
struct WeightGp {
  int component = 0;
  Matrix inputs;  // m x p_psi, normalized to the unit cube
  Vector weights; // training gamma_i
  PowExpParams params;
  Matrix corr_factor;   // lower Cholesky of R + nugget I
  Vector kinv_weights;  // (R + nugget I)^{-1} gamma_i
};

// Min/max normalization of cosmological parameters to [0, 1]^{p_psi}.
struct InputNormalization {
  Vector lo;
  Vector hi;
  static InputNormalization fit(const Matrix& psi);
  Matrix apply(const Matrix& psi) const;
  Vector apply(const Vector& psi) const;
  Matrix invert(const Matrix& unit) const;
};

// Center by the mean curve, thin-SVD the n x m centered matrix, keep the
// first p components of B* = U1 S / sqrt(m) and Gamma* = sqrt(m) V1.
// p beyond the numerical rank is truncated.
PCBasis build_basis(const Matrix& curves /* m x n */, int n_components);

// Multi-start profile maximum likelihood over beta with alpha fixed;
// sigma^2 has the closed form gamma^T R^{-1} gamma / m.
WeightGp fit_weight_gp(const Matrix& psi_unit, const Vector& gamma, int component,
                       double nugget = 1e-8);

double predict_weight(const WeightGp& model, const Vector& psi_star_unit);

// mean curve + sum_i gamma_hat_i(psi*) B_i
Vector predict_spectrum(const PCBasis& basis, const std::vector<WeightGp>& models,
                        const Vector& psi_star_unit);

}  // namespace specemu
