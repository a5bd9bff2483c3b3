#include "specemu/simstudy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specemu/csv.hpp"

namespace specemu {

std::string SimScenario::label() const {
  std::string out = function == SimFunction::F1 ? "f1" : "f2";
  out += variance == VarianceSetting::A ? "-A" : "-B";
  out += "-r" + std::to_string(n_runs);
  return out;
}

double eval_f1(double x, double m1, double u1) {
  return m1 * std::exp(-u1 * x / 2.0) * std::cos(x * std::sqrt(25.0 - (u1 / 2.0) * (u1 / 2.0))) -
         m1 * x / 5.0;
}

double eval_f2(double x, double m2, double u2) {
  return std::exp(-m2 * (x - 3.0) * (x - 3.0)) + std::exp(-u2 * (x - 1.0) * (x - 1.0)) -
         0.05 * std::sin(8.0 * (x - 1.9));
}

SimParams draw_sim_params(Rng& rng) {
  SimParams p;
  p.m1 = rng.uniform(0.5, 1.5);
  p.u1 = rng.uniform(1.5, 2.5);
  p.m2 = rng.uniform(0.6, 1.4);
  p.u2 = rng.uniform(0.6, 1.4);
  return p;
}

Vector sim_grid() {
  Vector x(41);
  for (int i = 0; i <= 40; ++i) x(i) = 0.1 * i;
  return x;
}

Matrix build_sigma_A(const Vector& x) {
  Matrix sigma = matern52_matrix(x, {0.01, 0.0225, 1e-8});
  return sigma;
}

Matrix build_sigma_B(const Vector& x) {
  const Matrix m = matern52_matrix(x, {0.05, 0.1, 0.0});
  Vector s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s(i) = std::pow(1.5, -x(i) / 2.0);
  Matrix sigma(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = s(i) * s(j) * m(i, j);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  sigma.diagonal().array() += 1e-8;
  return sigma;
}

Vector truth_on_grid(const SimScenario& scenario, const SimParams& params, const Vector& x) {
  Vector truth(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    truth(i) = scenario.function == SimFunction::F1 ? eval_f1(x(i), params.m1, params.u1)
                                                    : eval_f2(x(i), params.m2, params.u2);
  return truth;
}

Matrix estimate_sim_error_cov(const Matrix& runs, const Vector& x) {
  const Eigen::Index r = runs.rows();
  if (r < 2) throw InsufficientReplicates("estimate_sim_error_cov: need >= 2 runs");
  // residuals around the per-index run mean remove the (known-smooth) trend
  // exactly; their marginal covariance is (1 - 1/r) Sigma
  const Vector mean = runs.colwise().mean();
  std::vector<Vector> residuals;
  for (Eigen::Index i = 0; i < r; ++i)
    residuals.push_back(runs.row(i).transpose() - mean);
  const MaternMlFit fit = fit_matern_ml(residuals, x, 1e-8);
  Matrix sigma = matern52_matrix(x, {fit.lengthscale, fit.scale, 0.0});
  // undo the demeaning shrinkage, then scale to the covariance of the mean
  sigma /= static_cast<double>(r - 1);
  sigma.diagonal().array() += 1e-8;
  return sigma;
}

GaussianDist baseline_gp_fit(const Vector& ybar, const Vector& x) {
  const Eigen::Index n = x.size();
  if (ybar.size() != n) throw DimensionMismatch("baseline_gp_fit: length mismatch");
  const double mu = ybar.mean();
  const Vector resid = ybar.array() - mu;
  if (resid.cwiseAbs().maxCoeff() < 1e-12)
    return GaussianDist(Vector::Constant(n, mu), 1e-8 * Matrix::Identity(n, n),
                        {0.0, 1e-4, 10.0}, "baseline posterior covariance");

  // profile sigma^2 over a (lengthscale, noise-ratio) grid, then refine
  auto nll = [&](double log10_theta, double log10_ratio, double* scale_out,
                 Matrix* factor_out) -> double {
    const double theta = std::pow(10.0, log10_theta);
    const double ratio = std::pow(10.0, log10_ratio);
    Matrix c = matern52_matrix(x, {theta, 1.0, 0.0});
    c.diagonal().array() += ratio;
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Matrix factor = llt.matrixL();
    const Vector alpha = factor.triangularView<Eigen::Lower>().solve(resid);
    const double scale = alpha.squaredNorm() / static_cast<double>(n);
    if (!(scale > 0.0)) return std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * factor.diagonal().array().log().sum();
    if (scale_out) *scale_out = scale;
    if (factor_out) *factor_out = factor;
    return 0.5 * (static_cast<double>(n) * std::log(scale) + logdet);
  };

  double best_t = 0.0, best_g = -4.0, best = std::numeric_limits<double>::infinity();
  for (int ti = 0; ti <= 16; ++ti) {
    const double t = -6.0 + 0.5 * ti;
    for (int gi = 0; gi <= 18; ++gi) {
      const double g = -9.0 + 0.5 * gi;
      const double v = nll(t, g, nullptr, nullptr);
      if (v < best) {
        best = v;
        best_t = t;
        best_g = g;
      }
    }
  }
  if (!std::isfinite(best)) throw FitFailure("baseline_gp_fit: maximum likelihood failed");
  // one local refinement pass on a finer grid
  for (int ti = -4; ti <= 4; ++ti) {
    for (int gi = -4; gi <= 4; ++gi) {
      const double t = best_t + 0.125 * ti;
      const double g = best_g + 0.125 * gi;
      const double v = nll(t, g, nullptr, nullptr);
      if (v < best) {
        best = v;
        best_t = t;
        best_g = g;
      }
    }
  }

  double scale = 1.0;
  Matrix factor;
  if (!std::isfinite(nll(best_t, best_g, &scale, &factor)))
    throw FitFailure("baseline_gp_fit: refinement failed");
  const double theta = std::pow(10.0, best_t);

  // posterior of the latent curve given iid-noise observations
  const Matrix k = matern52_matrix(x, {theta, 1.0, 0.0});
  const Matrix gain_t = factor.transpose().triangularView<Eigen::Upper>().solve(
      factor.triangularView<Eigen::Lower>().solve(k));
  const Vector mean = Vector::Constant(n, mu) + gain_t.transpose() * resid;
  Matrix cov = scale * (k - k * gain_t);
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianDist(mean, std::move(cov), {1e-8, 1e-4, 10.0}, "baseline posterior covariance");
}

ReplicateResult run_replicate(const SimScenario& scenario, int replicate) {
  ReplicateResult row;
  row.replicate = replicate;
  Rng rng = Rng::stream(scenario.seed, "sim-" + scenario.label(), static_cast<std::uint64_t>(replicate));
  row.params = draw_sim_params(rng);

  const Vector x = sim_grid();
  const Vector truth = truth_on_grid(scenario, row.params, x);
  const Matrix sigma = scenario.variance == VarianceSetting::A ? build_sigma_A(x) : build_sigma_B(x);
  const Matrix factor = chol(sigma, {1e-8, 1e-4, 10.0}, "simulation covariance");

  Matrix runs(scenario.n_runs, x.size());
  Vector z(x.size());
  for (int r = 0; r < scenario.n_runs; ++r) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    runs.row(r) = (truth + factor.triangularView<Eigen::Lower>() * z).transpose();
  }
  const Vector ybar = runs.colwise().mean();

  try {
    WeightedSpectrum ws;
    ws.grid.x = x;
    ws.grid.k = (x.array() * std::log(10.0)).exp();
    ws.ybar = ybar;
    ws.sigma_eps = estimate_sim_error_cov(runs, x);
    ws.lambda_total = ws.sigma_eps.diagonal().cwiseInverse();
    ws.convention = ErrorCovConvention::Propagated;

    DgpConfig cfg = scenario.dgp;
    cfg.store_draws = true;
    cfg.seed = splitmix64(scenario.seed ^ hash_str(scenario.label())) ^
               static_cast<std::uint64_t>(replicate);

    const auto chain = fit_dgp(ws, cfg);
    const PosteriorSpectrum post = posterior_spectrum(chain, ws, cfg);

    // moment-matched Gaussian over the pooled posterior draws
    const Eigen::Index t = post.draws.rows();
    Matrix centered = post.draws.rowwise() - post.mean.transpose();
    Matrix pred_cov = centered.transpose() * centered / static_cast<double>(t - 1);
    pred_cov.diagonal().array() += 1e-8;
    GaussianDist pred(post.mean, std::move(pred_cov), {1e-8, 1e-4, 10.0},
                      "pooled posterior covariance");
    row.dgp_fco.log_score = log_score(truth, pred);
    row.dgp_fco.mse = mse(truth, post.mean);

    const GaussianDist base = baseline_gp_fit(ybar, x);
    row.baseline.log_score = log_score(truth, base);
    row.baseline.mse = mse(truth, base.mean());
  } catch (const std::exception& e) {
    row.error = e.what();
    row.dgp_fco = {std::numeric_limits<double>::quiet_NaN(),
                   std::numeric_limits<double>::quiet_NaN()};
    row.baseline = row.dgp_fco;
  }
  return row;
}

SimResult run_scenario(const SimScenario& scenario, int n_jobs) {
  SimResult result;
  result.scenario = scenario;
  result.rows.resize(static_cast<std::size_t>(scenario.replicates));
#ifdef _OPENMP
  if (n_jobs > 0) omp_set_num_threads(n_jobs);
#else
  (void)n_jobs;
#endif
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < scenario.replicates; ++rep)
    result.rows[static_cast<std::size_t>(rep)] = run_replicate(scenario, rep);
  return result;
}

std::string results_to_csv(const std::vector<SimResult>& results) {
  std::ostringstream out;
  out << "scenario,rep,method,log_score,mse\n";
  for (const auto& res : results) {
    for (const auto& row : res.rows) {
      out << res.scenario.label() << ',' << row.replicate << ",dgp_fco,"
          << format_double(row.dgp_fco.log_score) << ',' << format_double(row.dgp_fco.mse) << '\n';
      out << res.scenario.label() << ',' << row.replicate << ",baseline,"
          << format_double(row.baseline.log_score) << ',' << format_double(row.baseline.mse)
          << '\n';
    }
  }
  return out.str();
}

}  // namespace specemu
