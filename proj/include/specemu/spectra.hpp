#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specemu/gauss.hpp"
#include "specemu/kernels.hpp"

namespace specemu {

// Shared wavenumber grid; x_i = log10(k_i).
struct WavenumberGrid {
  Vector k;
  Vector x;

  static WavenumberGrid from_k(const Vector& k);
  Eigen::Index size() const { return k.size(); }
};

// One cosmology's raw curves on a shared grid, in emulation space.
struct SpectraBatch {
  std::optional<Vector> y_p;      // perturbation theory / anchor curve
  Matrix y_low;                   // r x n low-resolution runs
  std::optional<Vector> y_high;   // high-resolution run
  std::optional<Vector> y_truth;  // infinite-resolution curve, when available
  WavenumberGrid grid;
  std::string cosmology_id;

  Eigen::Index n_runs() const { return y_low.rows(); }
  Vector low_mean() const { return y_low.colwise().mean(); }
  void validate() const;
};

// Per-wavenumber precision of one low-resolution run, fitted by log-log
// regression, plus the high-resolution precision multiplier c.
struct PrecisionModel {
  Vector p;                // positive, one per grid index
  double c = 1.0;          // high-res precision = c * p_i
  double intercept = 0.0;  // log10 variance = intercept + slope * log10 k
  double slope = 0.0;
};

struct KRange {
  double lo = 0.0;
  double hi = 0.0;
  bool include_hi = false;
  bool contains(double k) const { return k >= lo && (include_hi ? k <= hi : k < hi); }
};

// Half-open k-intervals where each data type is deemed unbiased.
struct ValidityRanges {
  KRange anchor;  // perturbation theory (Mira-Titan) or infinite-resolution (CAMB)
  KRange low;
  KRange high;
  double anchor_precision = 1e8;

  static ValidityRanges mira_titan();
  static ValidityRanges camb();
};

struct Lambdas {
  Vector anchor;  // Lambda_p or Lambda_c
  Vector low;     // Lambda_l
  Vector high;    // Lambda_h
  Vector total() const { return anchor + low + high; }
};

enum class ErrorCovConvention { Diagonal, Literal, Propagated };

std::string to_string(ErrorCovConvention c);
ErrorCovConvention error_cov_convention_from_string(const std::string& s);

// Fused observation with its total precision and error covariance.
struct WeightedSpectrum {
  Vector ybar;
  Vector lambda_total;  // diagonal of Lambda
  Matrix sigma_eps;
  ErrorCovConvention convention = ErrorCovConvention::Diagonal;
  WavenumberGrid grid;
};

// P(k) -> log10(k^1.5 P(k) / (2 pi^2)), elementwise.
Vector to_emulation_space(const Vector& power, const WavenumberGrid& grid);
Vector from_emulation_space(const Vector& curve, const WavenumberGrid& grid);

// Pooled log-log regression of low-resolution run variances on wavenumber,
// with a high-resolution indicator term giving the precision multiplier c.
PrecisionModel fit_precisions(const std::vector<SpectraBatch>& batches,
                              const ValidityRanges& ranges);

// The three diagonal precision vectors, one per data type.
Lambdas build_lambdas(const WavenumberGrid& grid, const PrecisionModel& precision,
                      const ValidityRanges& ranges, int n_low_runs);

// ybar = Lambda^{-1} (Lambda_p y_p + Lambda_l ybar_l + Lambda_h y_h).
Vector weighted_average(const SpectraBatch& batch, const Lambdas& lambdas);

// Profile-ML Matern fit to zero-mean functional residual runs.
struct MaternMlFit {
  double scale = 1.0;        // sigma^2
  double lengthscale = 1.0;  // theta
  double loglik = 0.0;
};
MaternMlFit fit_matern_ml(const std::vector<Vector>& runs, const Vector& x,
                          double jitter = 1e-8);

// Assembles Sigma_eps from the precision vectors and the low-run-mean
// covariance Sigma_l under the selected convention; result is symmetrized
// and jittered to PSD.
Matrix error_cov_from_sigma_l(const Lambdas& lambdas, const Matrix& sigma_l,
                              ErrorCovConvention convention);

// Fuses one batch and builds Sigma_eps under the selected convention.
WeightedSpectrum estimate_error_cov(const SpectraBatch& batch,
                                    const PrecisionModel& precision,
                                    const Lambdas& lambdas,
                                    ErrorCovConvention convention,
                                    const ValidityRanges& ranges);

// CSV per cosmology: header k,y_p,y_low_1..y_low_r,y_high[,y_truth],
// wavenumbers ascending. `raw_power` applies the emulation-space transform
// on ingestion.
SpectraBatch load_batch_csv(const std::string& path, bool raw_power,
                            const std::string& cosmology_id = "");

}  // namespace specemu
