#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "specemu/gauss.hpp"
#include "specemu/spectra.hpp"

namespace specemu {

struct GammaPrior {
  double shape = 1.5;
  double rate = 1.0;
  double logpdf(double v) const;  // unnormalized
};

struct DgpConfig {
  int iterations = 10000;
  int burn_in = 5000;
  int thin = 5;
  GammaPrior theta_s_prior{1.5, 1.0};
  GammaPrior theta_w_prior{1.5, 4.0};
  double proposal_scale = 0.3;  // log-scale random-walk std
  double jitter = 1e-8;
  std::optional<Vector> mu_s;  // default zero
  std::optional<Vector> mu_w;  // default zero
  int s_draws_per_sample = 1;
  bool store_draws = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct WarpSample {
  Vector z;        // latent draw
  Vector warped;   // nondecreasing warped inputs
  double theta_s = 1.0;
  double theta_w = 1.0;
  double loglik = 0.0;
};

struct PosteriorSpectrum {
  int retained = 0;
  Vector mean;
  Vector lower;  // 2.5th percentile
  Vector upper;  // 97.5th percentile
  Matrix draws;  // optional, T x n; empty unless requested
};

// Softplus rates integrated by cumulative trapezoid over x, affinely
// rescaled so the warp spans [x_1, x_n]. Constant z gives the identity.
Vector monotone_warp(const Vector& z, const Vector& x);

// log N(ybar; mu_s, scale * Matern52(W, theta_s) + Sigma_eps)
double integrated_loglik(const Vector& ybar, const Vector& warped, double theta_s,
                         const Matrix& sigma_eps, const Vector& mu_s,
                         double jitter = 1e-8, double scale = 1.0);

// One elliptical-slice transition. prior_factor is the lower Cholesky
// factor of the latent prior covariance; always terminates.
Vector ess_update(const Vector& z_current, const Vector& prior_mean,
                  const Matrix& prior_factor,
                  const std::function<double(const Vector&)>& loglik, Rng& rng,
                  double* loglik_out = nullptr);

// Log acceptance ratio of the log-normal random-walk proposal, including
// the proposal-asymmetry correction. log_post excludes that correction.
double mh_log_accept_ratio(double log_post_current, double log_post_proposed,
                           double theta_current, double theta_proposed);

// One Metropolis step on a positive scalar with a log-normal random walk.
double mh_update_theta(double theta, const GammaPrior& prior, double proposal_scale,
                       const std::function<double(double)>& loglik, Rng& rng);

// ESS + Metropolis-within-Gibbs over {z (hence W), theta_W, theta_S}.
// Returns post-burn-in, thinned samples; deterministic for a fixed seed.
std::vector<WarpSample> fit_dgp(const WeightedSpectrum& ws, const DgpConfig& cfg);

// Closed-form conditional S | ybar for one warp sample:
// C = (Sigma_S^{-1} + Sigma_eps^{-1})^{-1}, m = C (Sigma_eps^{-1} ybar + Sigma_S^{-1} mu_s),
// computed through factorizations of Sigma_S + Sigma_eps.
GaussianDist conditional_spectrum(const Vector& warped, double theta_s,
                                  const Vector& ybar, const Matrix& sigma_eps,
                                  const Vector& mu_s, double jitter = 1e-8);

PosteriorSpectrum posterior_spectrum(const std::vector<WarpSample>& chain,
                                     const WeightedSpectrum& ws, const DgpConfig& cfg);

}  // namespace specemu
