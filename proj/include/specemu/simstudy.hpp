#pragma once

#include <string>
#include <vector>

#include "specemu/dgp.hpp"
#include "specemu/gauss.hpp"

namespace specemu {

enum class SimFunction { F1, F2 };
enum class VarianceSetting { A, B };

struct SimScenario {
  SimFunction function = SimFunction::F1;
  VarianceSetting variance = VarianceSetting::A;
  int n_runs = 5;        // r
  int replicates = 20;
  std::uint64_t seed = 0;
  DgpConfig dgp;         // MCMC settings for the DGP fit

  std::string label() const;
};

struct SimParams {
  double m1 = 1.0, u1 = 2.0, m2 = 1.0, u2 = 1.0;
};

struct ReplicateResult {
  int replicate = 0;
  SimParams params;
  ScoreReport dgp_fco;
  ScoreReport baseline;
  std::string error;  // nonempty when the replicate failed
};

struct SimResult {
  SimScenario scenario;
  std::vector<ReplicateResult> rows;
};

double eval_f1(double x, double m1, double u1);
double eval_f2(double x, double m2, double u2);

// m1 ~ U(0.5, 1.5), u1 ~ U(1.5, 2.5), m2, u2 ~ U(0.6, 1.4)
SimParams draw_sim_params(Rng& rng);

// default simulation grid x = {0, 0.1, ..., 4.0}
Vector sim_grid();

Matrix build_sigma_A(const Vector& x);
Matrix build_sigma_B(const Vector& x);

Vector truth_on_grid(const SimScenario& scenario, const SimParams& params, const Vector& x);

// Matern profile-ML estimate of the covariance of the run mean, from
// LOESS-detrended realizations (unit precisions).
Matrix estimate_sim_error_cov(const Matrix& runs, const Vector& x);

// Stationary Matern-5/2 GP regression with iid noise, hyperparameters by
// maximum likelihood; the spatial-independence stand-in for the
// competitor methods.
GaussianDist baseline_gp_fit(const Vector& ybar, const Vector& x);

ReplicateResult run_replicate(const SimScenario& scenario, int replicate);

// All replicates; independent RNG streams, parallel over replicates.
SimResult run_scenario(const SimScenario& scenario, int n_jobs = 0);

// tidy CSV: scenario,rep,method,log_score,mse
std::string results_to_csv(const std::vector<SimResult>& results);

}  // namespace specemu
