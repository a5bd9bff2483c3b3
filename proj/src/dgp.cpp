#include "specemu/dgp.hpp"

#include <algorithm>
#include <cmath>

namespace specemu {

double GammaPrior::logpdf(double v) const {
  if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(v) - rate * v;
}

void DgpConfig::validate() const {
  if (iterations <= 0) throw ConfigError("DgpConfig: iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations)
    throw ConfigError("DgpConfig: burn_in must be in [0, iterations)");
  if (thin < 1) throw ConfigError("DgpConfig: thin must be >= 1");
  if (!(theta_s_prior.shape > 0.0 && theta_s_prior.rate > 0.0 &&
        theta_w_prior.shape > 0.0 && theta_w_prior.rate > 0.0))
    throw ConfigError("DgpConfig: prior parameters must be positive");
  if (proposal_scale < 0.0) throw ConfigError("DgpConfig: proposal scale must be >= 0");
  if (jitter < 0.0) throw ConfigError("DgpConfig: jitter must be >= 0");
  if (s_draws_per_sample < 1) throw ConfigError("DgpConfig: s_draws_per_sample must be >= 1");
  if ((iterations - burn_in) / thin < 1)
    throw ConfigError("DgpConfig: no post-burn-in samples would be retained");
}

Vector monotone_warp(const Vector& z, const Vector& x) {
  const Eigen::Index n = x.size();
  if (z.size() != n) throw DimensionMismatch("monotone_warp: z/x length mismatch");
  // softplus rates, numerically stable for large |z|
  Vector rate(n);
  for (Eigen::Index i = 0; i < n; ++i)
    rate(i) = z(i) > 30.0 ? z(i) : std::log1p(std::exp(z(i)));
  Vector cum(n);
  cum(0) = 0.0;
  for (Eigen::Index i = 1; i < n; ++i)
    cum(i) = cum(i - 1) + 0.5 * (rate(i) + rate(i - 1)) * (x(i) - x(i - 1));
  const double span = x(n - 1) - x(0);
  Vector w(n);
  if (cum(n - 1) <= 0.0) {
    // all rates underflowed; fall back to the identity
    w = x;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) w(i) = x(0) + span * cum(i) / cum(n - 1);
  }
  return w;
}

double integrated_loglik(const Vector& ybar, const Vector& warped, double theta_s,
                         const Matrix& sigma_eps, const Vector& mu_s, double jitter,
                         double scale) {
  if (warped.size() != ybar.size() || sigma_eps.rows() != ybar.size())
    throw DimensionMismatch("integrated_loglik: dimension mismatch");
  Matrix cov = sigma_eps;
  if (scale > 0.0) cov += matern52_matrix(warped, {theta_s, scale, jitter});
  GaussianDist dist(mu_s, std::move(cov), {jitter > 0 ? jitter : 1e-8, 1e-4, 10.0},
                    "integrated likelihood covariance");
  return dist.logpdf(ybar);
}

Vector ess_update(const Vector& z_current, const Vector& prior_mean,
                  const Matrix& prior_factor,
                  const std::function<double(const Vector&)>& loglik, Rng& rng,
                  double* loglik_out) {
  const Eigen::Index n = z_current.size();
  Vector nu(n);
  for (Eigen::Index i = 0; i < n; ++i) nu(i) = rng.normal();
  nu = prior_factor.triangularView<Eigen::Lower>() * nu;

  const double log_y = loglik(z_current) + std::log(rng.uniform());
  double angle = rng.uniform(0.0, 2.0 * M_PI);
  double lo = angle - 2.0 * M_PI;
  double hi = angle;

  for (int tries = 0; tries < 1000; ++tries) {
    Vector proposal = prior_mean + (z_current - prior_mean) * std::cos(angle) + nu * std::sin(angle);
    const double ll = loglik(proposal);
    if (ll > log_y) {
      if (loglik_out) *loglik_out = ll;
      return proposal;
    }
    if (angle < 0.0)
      lo = angle;
    else
      hi = angle;
    angle = rng.uniform(lo, hi);
  }
  throw FitFailure("ess_update: bracket shrink did not terminate");
}

double mh_log_accept_ratio(double log_post_current, double log_post_proposed,
                           double theta_current, double theta_proposed) {
  return log_post_proposed - log_post_current + std::log(theta_proposed) -
         std::log(theta_current);
}

double mh_update_theta(double theta, const GammaPrior& prior, double proposal_scale,
                       const std::function<double(double)>& loglik, Rng& rng) {
  if (!(theta > 0.0)) throw InvalidParameter("mh_update_theta: theta must be positive");
  const double proposed = theta * std::exp(proposal_scale * rng.normal());
  const double lp_cur = loglik(theta) + prior.logpdf(theta);
  const double lp_prop = loglik(proposed) + prior.logpdf(proposed);
  const double log_alpha = mh_log_accept_ratio(lp_cur, lp_prop, theta, proposed);
  if (std::log(rng.uniform()) < log_alpha) return proposed;
  return theta;
}

std::vector<WarpSample> fit_dgp(const WeightedSpectrum& ws, const DgpConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = ws.grid.size();
  if (ws.ybar.size() != n || ws.sigma_eps.rows() != n)
    throw DimensionMismatch("fit_dgp: weighted spectrum is inconsistent");

  const Vector mu_s = cfg.mu_s ? *cfg.mu_s : Vector::Zero(n);
  const Vector mu_w = cfg.mu_w ? *cfg.mu_w : Vector::Zero(n);
  if (mu_s.size() != n || mu_w.size() != n)
    throw ConfigError("fit_dgp: prior mean length mismatch");

  Rng rng = Rng::stream(cfg.seed, "dgp-fit");

  // prior means of the gamma priors as deterministic initial values
  double theta_s = cfg.theta_s_prior.shape / cfg.theta_s_prior.rate;
  double theta_w = cfg.theta_w_prior.shape / cfg.theta_w_prior.rate;
  Vector z = Vector::Zero(n);

  auto warp_loglik = [&](const Vector& zc, double ts) {
    return integrated_loglik(ws.ybar, monotone_warp(zc, ws.grid.x), ts, ws.sigma_eps,
                             mu_s, cfg.jitter);
  };

  auto prior_factor_for = [&](double tw) {
    const Matrix cov = matern52_matrix(ws.grid.x, {tw, 1.0, cfg.jitter});
    return chol(cov, {cfg.jitter > 0 ? cfg.jitter : 1e-8, 1e-4, 10.0}, "warp prior covariance");
  };
  Matrix prior_factor = prior_factor_for(theta_w);

  std::vector<WarpSample> retained;
  double current_ll = warp_loglik(z, theta_s);

  for (int it = 0; it < cfg.iterations; ++it) {
    // (1) latent warp via elliptical slice sampling
    z = ess_update(
        z, mu_w, prior_factor, [&](const Vector& zc) { return warp_loglik(zc, theta_s); },
        rng, &current_ll);

    // (2) theta_W couples to z only through the latent prior
    const double theta_w_new = mh_update_theta(
        theta_w, cfg.theta_w_prior, cfg.proposal_scale,
        [&](double tw) {
          const Matrix cov = matern52_matrix(ws.grid.x, {tw, 1.0, cfg.jitter});
          try {
            GaussianDist prior(mu_w, cov, {cfg.jitter > 0 ? cfg.jitter : 1e-8, 1e-4, 10.0},
                               "warp prior covariance");
            return prior.logpdf(z);
          } catch (const SingularMatrix&) {
            return -std::numeric_limits<double>::infinity();
          }
        },
        rng);
    if (theta_w_new != theta_w) {
      theta_w = theta_w_new;
      prior_factor = prior_factor_for(theta_w);
    }

    // (3) theta_S through the integrated likelihood
    theta_s = mh_update_theta(
        theta_s, cfg.theta_s_prior, cfg.proposal_scale,
        [&](double ts) {
          try {
            return warp_loglik(z, ts);
          } catch (const SingularMatrix&) {
            return -std::numeric_limits<double>::infinity();
          }
        },
        rng);
    current_ll = warp_loglik(z, theta_s);

    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      WarpSample sample;
      sample.z = z;
      sample.warped = monotone_warp(z, ws.grid.x);
      sample.theta_s = theta_s;
      sample.theta_w = theta_w;
      sample.loglik = current_ll;
      if (!std::isfinite(sample.loglik))
        throw FitFailure("fit_dgp: non-finite log-likelihood at iteration " + std::to_string(it));
      retained.push_back(std::move(sample));
    }
  }
  return retained;
}

GaussianDist conditional_spectrum(const Vector& warped, double theta_s,
                                  const Vector& ybar, const Matrix& sigma_eps,
                                  const Vector& mu_s, double jitter) {
  const Eigen::Index n = ybar.size();
  const Matrix sigma_s = matern52_matrix(warped, {theta_s, 1.0, jitter});
  Matrix sum = sigma_s + sigma_eps;
  const Matrix factor = chol(sum, {jitter > 0 ? jitter : 1e-8, 1e-4, 10.0},
                             "Sigma_S + Sigma_eps");
  // gain = Sigma_S (Sigma_S + Sigma_eps)^{-1}
  Matrix tmp = factor.triangularView<Eigen::Lower>().solve(sigma_s);
  Matrix gain_t = factor.transpose().triangularView<Eigen::Upper>().solve(tmp);
  const Vector mean = mu_s + gain_t.transpose() * (ybar - mu_s);
  Matrix cov = sigma_s - sigma_s * gain_t;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianDist(mean, std::move(cov), {jitter > 0 ? jitter : 1e-8, 1e-4, 10.0},
                      "conditional spectrum covariance");
}

PosteriorSpectrum posterior_spectrum(const std::vector<WarpSample>& chain,
                                     const WeightedSpectrum& ws, const DgpConfig& cfg) {
  if (chain.empty()) throw ConfigError("posterior_spectrum: empty chain");
  const Eigen::Index n = ws.grid.size();
  const Vector mu_s = cfg.mu_s ? *cfg.mu_s : Vector::Zero(n);

  const std::size_t total_draws = chain.size() * static_cast<std::size_t>(cfg.s_draws_per_sample);
  Rng rng = Rng::stream(cfg.seed, "posterior-draws");

  std::vector<Vector> draws;
  draws.reserve(total_draws);
  std::size_t failures = 0;
  for (const auto& sample : chain) {
    try {
      const GaussianDist cond = conditional_spectrum(sample.warped, sample.theta_s,
                                                     ws.ybar, ws.sigma_eps, mu_s, cfg.jitter);
      for (auto& d : cond.sample(rng, cfg.s_draws_per_sample)) draws.push_back(std::move(d));
    } catch (const SingularMatrix&) {
      ++failures;
      if (failures * 100 > chain.size())
        throw FitFailure("posterior_spectrum: more than 1% of samples failed to factorize");
    }
  }
  if (draws.size() < 100)
    throw ConfigError("posterior_spectrum: need at least 100 posterior draws for bands");

  PosteriorSpectrum post;
  post.retained = static_cast<int>(chain.size());
  post.mean = Vector::Zero(n);
  for (const auto& d : draws) post.mean += d;
  post.mean /= static_cast<double>(draws.size());

  post.lower = Vector(n);
  post.upper = Vector(n);
  std::vector<double> column(draws.size());
  auto percentile = [&](double q) {
    const double pos = q * static_cast<double>(column.size() - 1);
    const std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t i1 = std::min(i0 + 1, column.size() - 1);
    const double frac = pos - static_cast<double>(i0);
    return (1.0 - frac) * column[i0] + frac * column[i1];
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < draws.size(); ++t) column[t] = draws[t](i);
    std::sort(column.begin(), column.end());
    post.lower(i) = percentile(0.025);
    post.upper(i) = percentile(0.975);
  }
  if (cfg.store_draws) {
    post.draws = Matrix(static_cast<Eigen::Index>(draws.size()), n);
    for (std::size_t t = 0; t < draws.size(); ++t)
      post.draws.row(static_cast<Eigen::Index>(t)) = draws[t];
  }
  return post;
}

}  // namespace specemu
