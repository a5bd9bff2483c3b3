#include "specemu/spectra.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>

#include "specemu/csv.hpp"
#include "specemu/loess.hpp"

namespace specemu {

namespace {
constexpr double kTwoPiSq = 19.7392088021787172376690193185;
constexpr double kLn10 = 2.30258509299404568401799145468;

// E[log10(chi2_nu / nu)]; subtracting this makes log sample variances
// unbiased for log10 of the true variance.
double log_variance_bias(double dof) {
  return (boost::math::digamma(dof / 2.0) + std::log(2.0) - std::log(dof)) / kLn10;
}
}  // namespace

WavenumberGrid WavenumberGrid::from_k(const Vector& k_in) {
  if (k_in.size() < 2) throw InvalidParameter("WavenumberGrid: need at least 2 wavenumbers");
  for (Eigen::Index i = 0; i < k_in.size(); ++i) {
    if (!(k_in(i) > 0.0)) throw InvalidParameter("WavenumberGrid: wavenumbers must be positive");
    if (i > 0 && !(k_in(i) > k_in(i - 1)))
      throw InvalidParameter("WavenumberGrid: wavenumbers must be strictly increasing");
  }
  WavenumberGrid g;
  g.k = k_in;
  g.x = k_in.array().log10();
  return g;
}

void SpectraBatch::validate() const {
  const Eigen::Index n = grid.size();
  if (y_low.rows() >= 1 && y_low.cols() != n)
    throw DimensionMismatch("SpectraBatch: y_low column count != grid size");
  if (y_p && y_p->size() != n) throw DimensionMismatch("SpectraBatch: y_p length != grid size");
  if (y_high && y_high->size() != n)
    throw DimensionMismatch("SpectraBatch: y_high length != grid size");
  if (y_truth && y_truth->size() != n)
    throw DimensionMismatch("SpectraBatch: y_truth length != grid size");
}

ValidityRanges ValidityRanges::mira_titan() {
  ValidityRanges r;
  r.anchor = {0.0, 0.04, false};
  r.low = {0.04, 0.25, false};
  r.high = {0.04, 5.0, true};
  return r;
}

ValidityRanges ValidityRanges::camb() {
  ValidityRanges r;
  const double kc = std::pow(10.0, -2.2);
  r.anchor = {0.0, kc, false};
  r.low = {kc, std::numeric_limits<double>::infinity(), true};
  r.high = {kc, std::numeric_limits<double>::infinity(), true};
  return r;
}

std::string to_string(ErrorCovConvention c) {
  switch (c) {
    case ErrorCovConvention::Diagonal: return "diagonal";
    case ErrorCovConvention::Literal: return "literal";
    case ErrorCovConvention::Propagated: return "propagated";
  }
  return "unknown";
}

ErrorCovConvention error_cov_convention_from_string(const std::string& s) {
  if (s == "diagonal") return ErrorCovConvention::Diagonal;
  if (s == "literal") return ErrorCovConvention::Literal;
  if (s == "propagated") return ErrorCovConvention::Propagated;
  throw ConfigError("unknown error-covariance convention: " + s);
}

Vector to_emulation_space(const Vector& power, const WavenumberGrid& grid) {
  if (power.size() != grid.size())
    throw DimensionMismatch("to_emulation_space: length mismatch");
  Vector out(power.size());
  for (Eigen::Index i = 0; i < power.size(); ++i) {
    if (!(power(i) > 0.0))
      throw InvalidParameter("to_emulation_space: power must be positive");
    out(i) = std::log10(std::pow(grid.k(i), 1.5) * power(i) / kTwoPiSq);
  }
  return out;
}

Vector from_emulation_space(const Vector& curve, const WavenumberGrid& grid) {
  if (curve.size() != grid.size())
    throw DimensionMismatch("from_emulation_space: length mismatch");
  Vector out(curve.size());
  for (Eigen::Index i = 0; i < curve.size(); ++i)
    out(i) = std::pow(10.0, curve(i)) * kTwoPiSq / std::pow(grid.k(i), 1.5);
  return out;
}

PrecisionModel fit_precisions(const std::vector<SpectraBatch>& batches,
                              const ValidityRanges& ranges) {
  if (batches.empty()) throw InvalidParameter("fit_precisions: no batches");
  const WavenumberGrid& grid = batches.front().grid;
  const Eigen::Index n = grid.size();
  for (const auto& b : batches) {
    b.validate();
    if (b.n_runs() < 2)
      throw InsufficientReplicates("fit_precisions: need >= 2 low-resolution runs per batch");
    if (b.grid.size() != n) throw DimensionMismatch("fit_precisions: grids must match");
  }

  const double n_batches = static_cast<double>(batches.size());
  bool any_high = false;
  double mean_inv_r = 0.0;
  for (const auto& b : batches) {
    if (b.y_high) any_high = true;
    mean_inv_r += 1.0 / static_cast<double>(b.n_runs());
  }
  mean_inv_r /= n_batches;
  if (!any_high)
    throw MissingSource("fit_precisions: y_high required to estimate the multiplier c");

  std::vector<Eigen::Vector3d> design;
  std::vector<double> response;

  // low-resolution sample variances, pooled across batches at each wavenumber
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!ranges.low.contains(grid.k(i))) continue;
    double pooled = 0.0;
    double dof = 0.0;
    for (const auto& b : batches) {
      const Eigen::Index r = b.n_runs();
      const double mean = b.y_low.col(i).mean();
      const double ss = (b.y_low.col(i).array() - mean).square().sum();
      pooled += ss / static_cast<double>(r - 1);
      dof += static_cast<double>(r - 1);
    }
    pooled /= n_batches;
    if (!(pooled > 0.0)) continue;
    design.emplace_back(1.0, grid.x(i), 0.0);
    response.push_back(std::log10(pooled) - log_variance_bias(dof));
  }

  // high-resolution squared residuals around the low-run mean; their
  // variance is v_h + v_l / r, which the indicator coefficient absorbs
  Eigen::Index n_high_rows = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(ranges.low.contains(grid.k(i)) && ranges.high.contains(grid.k(i)))) continue;
    double pooled = 0.0;
    double count = 0.0;
    for (const auto& b : batches) {
      if (!b.y_high) continue;
      const double resid = (*b.y_high)(i)-b.y_low.col(i).mean();
      pooled += resid * resid;
      count += 1.0;
    }
    if (count == 0.0) continue;
    pooled /= count;
    if (!(pooled > 0.0)) continue;
    design.emplace_back(1.0, grid.x(i), 1.0);
    response.push_back(std::log10(pooled) - log_variance_bias(count));
    ++n_high_rows;
  }

  if (design.size() < 4 || n_high_rows == 0)
    throw InsufficientReplicates("fit_precisions: too few wavenumbers in the validity windows");

  Matrix X(static_cast<Eigen::Index>(design.size()), 3);
  Vector y(static_cast<Eigen::Index>(design.size()));
  for (std::size_t i = 0; i < design.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = design[i];
    y(static_cast<Eigen::Index>(i)) = response[i];
  }
  const Vector coef = (X.transpose() * X).ldlt().solve(X.transpose() * y);

  PrecisionModel model;
  model.intercept = coef(0);
  model.slope = coef(1);
  model.p = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double log_var = model.intercept + model.slope * grid.x(i);
    model.p(i) = std::pow(10.0, -log_var);
  }

  // 10^{coef_2} estimates (v_h + v_l/r) / v_l; remove the low-run-mean
  // contribution before inverting
  const double combined_ratio = std::pow(10.0, coef(2));
  double inv_c = combined_ratio - mean_inv_r;
  if (!(inv_c > 0.0)) inv_c = combined_ratio;
  model.c = 1.0 / inv_c;
  return model;
}

Lambdas build_lambdas(const WavenumberGrid& grid, const PrecisionModel& precision,
                      const ValidityRanges& ranges, int n_low_runs) {
  const Eigen::Index n = grid.size();
  if (precision.p.size() != n) throw DimensionMismatch("build_lambdas: precision length mismatch");
  Lambdas lambdas;
  lambdas.anchor = Vector::Zero(n);
  lambdas.low = Vector::Zero(n);
  lambdas.high = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double k = grid.k(i);
    if (ranges.anchor.contains(k)) lambdas.anchor(i) = ranges.anchor_precision;
    if (ranges.low.contains(k)) lambdas.low(i) = static_cast<double>(n_low_runs) * precision.p(i);
    if (ranges.high.contains(k)) lambdas.high(i) = precision.c * precision.p(i);
    if (lambdas.anchor(i) == 0.0 && lambdas.low(i) == 0.0 && lambdas.high(i) == 0.0)
      throw CoverageError("build_lambdas: wavenumber k=" + format_double(k) +
                          " covered by no data type");
  }
  return lambdas;
}

namespace {
// Anchor curve: perturbation theory when present, otherwise the
// infinite-resolution curve (CAMB mode).
const Vector* anchor_curve(const SpectraBatch& batch) {
  if (batch.y_p) return &*batch.y_p;
  if (batch.y_truth) return &*batch.y_truth;
  return nullptr;
}
}  // namespace

Vector weighted_average(const SpectraBatch& batch, const Lambdas& lambdas) {
  batch.validate();
  const Eigen::Index n = batch.grid.size();
  if (lambdas.anchor.size() != n) throw DimensionMismatch("weighted_average: lambda size mismatch");
  const Vector* ya = anchor_curve(batch);
  const bool have_low = batch.y_low.rows() >= 1;
  Vector low_mean;
  if (have_low) low_mean = batch.low_mean();

  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double total = lambdas.anchor(i) + lambdas.low(i) + lambdas.high(i);
    if (!(total > 0.0))
      throw CoverageError("weighted_average: zero total precision at index " + std::to_string(i));
    double acc = 0.0;
    if (lambdas.anchor(i) > 0.0) {
      if (!ya) throw MissingSource("weighted_average: anchor curve required but absent");
      acc += lambdas.anchor(i) * (*ya)(i);
    }
    if (lambdas.low(i) > 0.0) {
      if (!have_low) throw MissingSource("weighted_average: low-resolution runs required but absent");
      acc += lambdas.low(i) * low_mean(i);
    }
    if (lambdas.high(i) > 0.0) {
      if (!batch.y_high) throw MissingSource("weighted_average: y_high required but absent");
      acc += lambdas.high(i) * (*batch.y_high)(i);
    }
    out(i) = acc / total;
  }
  return out;
}

MaternMlFit fit_matern_ml(const std::vector<Vector>& runs, const Vector& x, double jitter) {
  if (runs.size() < 2) throw InsufficientReplicates("fit_matern_ml: need >= 2 runs");
  const Eigen::Index n = x.size();
  for (const auto& z : runs)
    if (z.size() != n) throw DimensionMismatch("fit_matern_ml: run length mismatch");
  const double n_runs = static_cast<double>(runs.size());
  const double total = n_runs * static_cast<double>(n);

  // profile negative log-likelihood over theta; sigma^2 has a closed form
  auto profile_nll = [&](double log10_theta, double* scale_out) -> double {
    const double theta = std::pow(10.0, log10_theta);
    MaternParams params{theta, 1.0, jitter};
    Matrix corr = matern52_matrix(x, params);
    Matrix factor;
    try {
      factor = chol(corr, {jitter, 1e-4, 10.0}, "Matern correlation");
    } catch (const SingularMatrix&) {
      return std::numeric_limits<double>::infinity();
    }
    double quad = 0.0;
    for (const auto& z : runs)
      quad += factor.triangularView<Eigen::Lower>().solve(z).squaredNorm();
    const double scale = quad / total;
    if (!(scale > 0.0)) return std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * factor.diagonal().array().log().sum();
    if (scale_out) *scale_out = scale;
    return 0.5 * (total * std::log(scale) + n_runs * logdet + total);
  };

  // coarse multi-start grid, then golden-section refinement
  const double lo = -6.0, hi = 2.0;
  const int n_grid = 33;
  double best_t = lo, best_nll = std::numeric_limits<double>::infinity();
  for (int g = 0; g < n_grid; ++g) {
    const double t = lo + (hi - lo) * g / (n_grid - 1);
    const double nll = profile_nll(t, nullptr);
    if (nll < best_nll) {
      best_nll = nll;
      best_t = t;
    }
  }
  if (!std::isfinite(best_nll))
    throw FitFailure("fit_matern_ml: no lengthscale yielded a factorizable correlation");

  const double step = (hi - lo) / (n_grid - 1);
  double a = std::max(lo, best_t - step), b = std::min(hi, best_t + step);
  const double gr = 0.61803398874989484820;
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = profile_nll(c1, nullptr), f2 = profile_nll(c2, nullptr);
  for (int it = 0; it < 40; ++it) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - gr * (b - a);
      f1 = profile_nll(c1, nullptr);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (b - a);
      f2 = profile_nll(c2, nullptr);
    }
  }
  const double t_hat = 0.5 * (a + b);
  MaternMlFit fit;
  double scale = 0.0;
  const double nll = profile_nll(t_hat, &scale);
  if (!std::isfinite(nll)) throw FitFailure("fit_matern_ml: refinement left an infeasible lengthscale");
  fit.lengthscale = std::pow(10.0, t_hat);
  fit.scale = scale;
  fit.loglik = -nll - 0.5 * total * std::log(2.0 * M_PI);
  return fit;
}

namespace {
Vector generalized_diag_inverse(const Vector& v) {
  Vector out = Vector::Zero(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0) out(i) = 1.0 / v(i);
  return out;
}

Matrix symmetrize_and_jitter(Matrix m, const std::string& role) {
  m = 0.5 * (m + m.transpose()).eval();
  double jit = 0.0;
  chol(m, {1e-8, 1e-4, 10.0}, role, &jit);
  if (jit > 0.0) m.diagonal().array() += jit;
  return m;
}

// Dense covariance of the low-run mean over the low-resolution window,
// zero elsewhere: Matern fitted to precision-prescaled, LOESS-detrended
// runs, scaled back and divided by the run count.
Matrix low_run_mean_cov(const SpectraBatch& batch, const PrecisionModel& precision,
                        const ValidityRanges& ranges) {
  const WavenumberGrid& grid = batch.grid;
  const Eigen::Index n = grid.size();
  std::vector<Eigen::Index> win;
  for (Eigen::Index i = 0; i < n; ++i)
    if (ranges.low.contains(grid.k(i))) win.push_back(i);
  if (win.size() < 5)
    throw InsufficientReplicates("estimate_error_cov: low-resolution window too small");
  if (batch.n_runs() < 2)
    throw InsufficientReplicates("estimate_error_cov: need >= 2 runs for the dense convention");

  const Eigen::Index nw = static_cast<Eigen::Index>(win.size());
  Vector xw(nw), trend_w(nw);
  for (Eigen::Index j = 0; j < nw; ++j) xw(j) = grid.x(win[static_cast<std::size_t>(j)]);
  const Vector low_mean = batch.low_mean();
  Vector mean_w(nw);
  for (Eigen::Index j = 0; j < nw; ++j) mean_w(j) = low_mean(win[static_cast<std::size_t>(j)]);
  trend_w = loess_smooth(mean_w, xw, 0.75);

  std::vector<Vector> prescaled;
  for (Eigen::Index r = 0; r < batch.n_runs(); ++r) {
    Vector z(nw);
    for (Eigen::Index j = 0; j < nw; ++j) {
      const Eigen::Index i = win[static_cast<std::size_t>(j)];
      z(j) = std::sqrt(precision.p(i)) * (batch.y_low(r, i) - trend_w(j));
    }
    prescaled.push_back(std::move(z));
  }
  const MaternMlFit fit = fit_matern_ml(prescaled, xw, 1e-8);

  Matrix sigma_l = Matrix::Zero(n, n);
  const double inv_r = 1.0 / static_cast<double>(batch.n_runs());
  for (Eigen::Index a = 0; a < nw; ++a) {
    const Eigen::Index i = win[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b <= a; ++b) {
      const Eigen::Index j = win[static_cast<std::size_t>(b)];
      const double d = xw(a) - xw(b);
      const double val = fit.scale * matern52(d * d, fit.lengthscale) /
                         std::sqrt(precision.p(i) * precision.p(j)) * inv_r;
      sigma_l(i, j) = val;
      sigma_l(j, i) = val;
    }
  }
  return sigma_l;
}
}  // namespace

Matrix error_cov_from_sigma_l(const Lambdas& lambdas, const Matrix& sigma_l,
                              ErrorCovConvention convention) {
  const Eigen::Index n = lambdas.anchor.size();
  switch (convention) {
    case ErrorCovConvention::Diagonal: {
      Matrix sigma = Matrix::Zero(n, n);
      const Vector total = lambdas.total();
      for (Eigen::Index i = 0; i < n; ++i) sigma(i, i) = 1.0 / total(i);
      return sigma;
    }
    case ErrorCovConvention::Literal: {
      Matrix inner = sigma_l;
      inner.diagonal() += generalized_diag_inverse(lambdas.anchor);
      inner.diagonal() += generalized_diag_inverse(lambdas.high);
      const Matrix factor = chol(inner, {1e-10, 1e-4, 10.0}, "literal Sigma_eps inner matrix");
      Matrix identity = Matrix::Identity(n, n);
      Matrix inv = factor.triangularView<Eigen::Lower>().solve(identity);
      inv = factor.transpose().triangularView<Eigen::Upper>().solve(inv);
      return symmetrize_and_jitter(std::move(inv), "literal Sigma_eps");
    }
    case ErrorCovConvention::Propagated: {
      Matrix inner = lambdas.low.asDiagonal() * sigma_l * lambdas.low.asDiagonal();
      inner.diagonal() += lambdas.anchor + lambdas.high;
      const Vector inv_total = lambdas.total().cwiseInverse();
      Matrix sigma = inv_total.asDiagonal() * inner * inv_total.asDiagonal();
      return symmetrize_and_jitter(std::move(sigma), "propagated Sigma_eps");
    }
  }
  throw ConfigError("error_cov_from_sigma_l: unknown convention");
}

WeightedSpectrum estimate_error_cov(const SpectraBatch& batch,
                                    const PrecisionModel& precision,
                                    const Lambdas& lambdas,
                                    ErrorCovConvention convention,
                                    const ValidityRanges& ranges) {
  batch.validate();
  WeightedSpectrum ws;
  ws.grid = batch.grid;
  ws.convention = convention;
  ws.lambda_total = lambdas.total();
  ws.ybar = weighted_average(batch, lambdas);
  const Matrix sigma_l = convention == ErrorCovConvention::Diagonal
                             ? Matrix()
                             : low_run_mean_cov(batch, precision, ranges);
  ws.sigma_eps = error_cov_from_sigma_l(lambdas, sigma_l, convention);
  return ws;
}

SpectraBatch load_batch_csv(const std::string& path, bool raw_power,
                            const std::string& cosmology_id) {
  const CsvTable table = read_csv(path);
  const int kc = table.column("k");
  if (kc < 0) throw ConfigError("batch CSV missing required column 'k': " + path);
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  if (n < 2) throw ConfigError("batch CSV needs at least 2 rows: " + path);

  auto parse_col = [&](int col) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
      v(i) = std::stod(table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)]);
    return v;
  };

  SpectraBatch batch;
  batch.cosmology_id = cosmology_id.empty() ? path : cosmology_id;
  batch.grid = WavenumberGrid::from_k(parse_col(kc));

  std::vector<int> low_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (table.header[c].rfind("y_low_", 0) == 0) low_cols.push_back(static_cast<int>(c));
  if (low_cols.empty()) throw ConfigError("batch CSV has no y_low_* columns: " + path);

  auto maybe = [&](const char* name) -> std::optional<Vector> {
    const int col = table.column(name);
    if (col < 0) return std::nullopt;
    Vector v = parse_col(col);
    return raw_power ? to_emulation_space(v, batch.grid) : v;
  };
  batch.y_p = maybe("y_p");
  batch.y_high = maybe("y_high");
  batch.y_truth = maybe("y_truth");

  batch.y_low = Matrix(static_cast<Eigen::Index>(low_cols.size()), n);
  for (std::size_t r = 0; r < low_cols.size(); ++r) {
    Vector v = parse_col(low_cols[r]);
    if (raw_power) v = to_emulation_space(v, batch.grid);
    batch.y_low.row(static_cast<Eigen::Index>(r)) = v;
  }
  batch.validate();
  return batch;
}

}  // namespace specemu
