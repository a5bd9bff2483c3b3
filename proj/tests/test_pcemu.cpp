#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "specemu/pcemu.hpp"
#include "specemu/rng.hpp"

using namespace specemu;

namespace {
Matrix centered(const Matrix& curves) {
  const Vector mean = curves.colwise().mean();
  Matrix eta(curves.cols(), curves.rows());
  for (Eigen::Index j = 0; j < curves.rows(); ++j)
    eta.col(j) = curves.row(j).transpose() - mean;
  return eta;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}
}  // namespace

TEST_CASE("build_basis") {
  SUBCASE("identical curves collapse to the mean") {
    Matrix curves = Matrix::Ones(4, 6) * 2.5;
    const PCBasis pc = build_basis(curves, 3);
    CHECK((pc.mean_curve - Vector::Constant(6, 2.5)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(pc.singular_values.maxCoeff() < 1e-12);
    CHECK(pc.retained == 1);
    const Matrix recon = pc.basis * pc.weights.transpose();
    CHECK(recon.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("rank-2 set reconstructs exactly with 2 components") {
    Rng rng(3);
    Vector a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    Matrix curves(3, 5);
    curves.row(0) = (2.0 * a + b).transpose();
    curves.row(1) = (a - b).transpose();
    curves.row(2) = (-a + 3.0 * b).transpose();
    const PCBasis pc = build_basis(curves, 2);
    const Matrix eta = centered(curves);
    CHECK((pc.basis * pc.weights.transpose() - eta).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("random 20x8 full-rank reconstruction and orthogonality") {
    Rng rng(5);
    Matrix curves(20, 8);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 8; ++j) curves(i, j) = rng.normal();
    const PCBasis pc = build_basis(curves, 8);
    REQUIRE(pc.retained == 8);
    const Matrix eta = centered(curves);
    CHECK((pc.basis * pc.weights.transpose() - eta).norm() / eta.norm() < 1e-10);

    // recover U1 = sqrt(m) B diag(1/sigma); its columns are orthonormal
    const double sqrt_m = std::sqrt(20.0);
    const Matrix u1 =
        sqrt_m * pc.basis * pc.singular_values.head(8).cwiseInverse().asDiagonal();
    CHECK((u1.transpose() * u1 - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pc.weights.transpose() * pc.weights / 20.0 - Matrix::Identity(8, 8))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    // singular values sorted descending
    for (int i = 1; i < pc.singular_values.size(); ++i)
      CHECK(pc.singular_values(i) <= pc.singular_values(i - 1));
  }
  SUBCASE("truncation error equals the discarded spectrum") {
    Rng rng(6);
    Matrix curves(12, 10);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 10; ++j) curves(i, j) = rng.normal();
    const Matrix eta = centered(curves);
    const PCBasis full = build_basis(curves, 10);
    for (int p = 1; p <= full.retained; ++p) {
      const PCBasis pc = build_basis(curves, p);
      const double err = (eta - pc.basis * pc.weights.transpose()).squaredNorm();
      double discarded = 0.0;
      for (int i = p; i < full.singular_values.size(); ++i)
        discarded += full.singular_values(i) * full.singular_values(i);
      CHECK(err == doctest::Approx(discarded).epsilon(1e-8));
    }
  }
  SUBCASE("rank truncation and validation") {
    Matrix curves(3, 5);
    curves.row(0) = Vector::LinSpaced(5, 0.0, 1.0).transpose();
    curves.row(1) = 2.0 * curves.row(0);
    curves.row(2) = -curves.row(0);
    const PCBasis pc = build_basis(curves, 3);  // centered rank is 1
    CHECK(pc.retained == 1);
    CHECK_THROWS_AS(build_basis(Matrix::Ones(1, 5), 1), InvalidParameter);
    CHECK_THROWS_AS(build_basis(Matrix::Ones(3, 5), 0), InvalidParameter);
  }
}

TEST_CASE("input normalization") {
  Rng rng(9);
  Matrix psi(10, 3);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 3; ++j) psi(i, j) = rng.uniform(-5.0, 7.0);
  psi.col(2).setConstant(4.0);  // degenerate dimension
  const InputNormalization norm = InputNormalization::fit(psi);
  const Matrix unit = norm.apply(psi);
  CHECK(unit.col(0).minCoeff() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(unit.col(0).maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(unit.col(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((norm.invert(unit) - psi).cwiseAbs().maxCoeff() < 1e-12);
  const Vector row = norm.apply(Vector(psi.row(4).transpose()));
  CHECK((row.transpose() - unit.row(4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_weight_gp recovers beta") {
  const int m = 40;
  std::vector<double> betas;
  for (int s = 0; s < 20; ++s) {
    Rng rng = Rng::stream(700, "weight-gp", s);
    Matrix psi(m, 1);
    for (int i = 0; i < m; ++i) psi(i, 0) = rng.uniform();
    PowExpParams truth;
    truth.beta = Vector::Constant(1, 1.0);
    truth.nugget = 1e-8;
    const Matrix corr = powexp_corr_matrix(psi, truth);
    const Vector gamma = GaussianDist(Vector::Zero(m), corr, {0.0, 1e-4, 10.0}).sample(rng, 1)[0];
    const WeightGp gp = fit_weight_gp(psi, gamma, 0);
    betas.push_back(gp.params.beta(0));
    CHECK(gp.params.scale > 0.0);
  }
  CHECK(std::abs(median(betas) - 1.0) < 0.5);
}

TEST_CASE("fit_weight_gp degenerate cases") {
  SUBCASE("constant weights floor the scale at the nugget") {
    Matrix psi(6, 1);
    psi << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
    const Vector gamma = Vector::Constant(6, 1.7);
    const WeightGp gp = fit_weight_gp(psi, gamma, 0, 1e-8);
    CHECK(gp.params.scale >= 1e-8);
    for (int i = 0; i < 6; ++i)
      CHECK(predict_weight(gp, psi.row(i).transpose()) == doctest::Approx(1.7).epsilon(1e-4));
  }
  SUBCASE("duplicated inputs with differing weights survive via the nugget") {
    Matrix psi(4, 1);
    psi << 0.3, 0.3, 0.7, 0.7;
    Vector gamma(4);
    gamma << 1.0, 1.1, -0.5, -0.4;
    CHECK_NOTHROW(fit_weight_gp(psi, gamma, 0, 1e-6));
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(fit_weight_gp(Matrix::Ones(3, 1), Vector::Zero(2), 0), DimensionMismatch);
    CHECK_THROWS_AS(fit_weight_gp(Matrix::Ones(1, 1), Vector::Zero(1), 0), InvalidParameter);
  }
}

TEST_CASE("predict_weight") {
  Rng rng(11);
  const int m = 25;
  Matrix psi(m, 2);
  for (int i = 0; i < m; ++i) {
    psi(i, 0) = rng.uniform();
    psi(i, 1) = rng.uniform();
  }
  Vector gamma(m);
  for (int i = 0; i < m; ++i) gamma(i) = std::sin(3.0 * psi(i, 0)) + 0.5 * psi(i, 1);
  const WeightGp gp = fit_weight_gp(psi, gamma, 0, 1e-8);

  SUBCASE("interpolates the training points") {
    for (int i = 0; i < m; ++i)
      CHECK(std::abs(predict_weight(gp, psi.row(i).transpose()) - gamma(i)) < 1e-4);
  }
  SUBCASE("reverts to zero far from the data") {
    const Vector far = Vector::Constant(2, 1e6);
    CHECK(std::abs(predict_weight(gp, far)) < 1e-10);
  }
  SUBCASE("matches the dense-inverse formula") {
    Matrix small(3, 1);
    small << 0.1, 0.5, 0.9;
    Vector g(3);
    g << 1.0, -0.7, 0.4;
    const WeightGp gp3 = fit_weight_gp(small, g, 0, 1e-8);
    const Matrix corr = powexp_corr_matrix(small, gp3.params);
    const Vector star = Vector::Constant(1, 0.33);
    const Vector r = powexp_corr_vector(small, star, gp3.params);
    const double naive = r.dot(corr.inverse() * g);
    CHECK(predict_weight(gp3, star) == doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("predict_spectrum") {
  Rng rng(13);
  const int m = 20, n = 16, p_true = 4;
  Matrix psi(m, 2);
  for (int i = 0; i < m; ++i) {
    psi(i, 0) = rng.uniform();
    psi(i, 1) = rng.uniform();
  }
  // smooth weights with well-separated amplitudes over orthogonal directions
  Matrix latent(m, p_true);
  for (int i = 0; i < m; ++i) {
    latent(i, 0) = 6.0 * std::sin(2.0 * psi(i, 0)) + psi(i, 1);
    latent(i, 1) = 2.5 * std::cos(2.0 * psi(i, 1));
    latent(i, 2) = 1.0 * psi(i, 0) * psi(i, 1);
    latent(i, 3) = 0.4 * std::sin(3.0 * psi(i, 0) + psi(i, 1));
  }
  Matrix directions(p_true, n);
  for (int i = 0; i < p_true; ++i)
    for (int j = 0; j < n; ++j) directions(i, j) = rng.normal();
  Matrix curves = latent * directions;
  for (int i = 0; i < m; ++i) curves.row(i).array() += 3.0;

  SUBCASE("reproduces training curves through the basis") {
    const PCBasis pc = build_basis(curves, p_true);
    std::vector<WeightGp> models;
    for (int c = 0; c < pc.retained; ++c)
      models.push_back(fit_weight_gp(psi, pc.weights.col(c), c, 1e-8));
    for (int j : {0, 7, 19}) {
      const Vector pred = predict_spectrum(pc, models, psi.row(j).transpose());
      CHECK((pred - curves.row(j).transpose()).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("far inputs return the mean curve") {
      const Vector far = Vector::Constant(2, 1e6);
      const Vector pred = predict_spectrum(pc, models, far);
      CHECK((pred - pc.mean_curve).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("prediction is continuous in psi") {
      const Vector base = psi.row(3).transpose();
      Vector nudged = base;
      nudged(0) += 1e-8;
      const Vector a = predict_spectrum(pc, models, base);
      const Vector b = predict_spectrum(pc, models, nudged);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4);
    }
    SUBCASE("component count mismatch") {
      models.pop_back();
      CHECK_THROWS_AS(predict_spectrum(pc, models, psi.row(0).transpose()), DimensionMismatch);
    }
  }

  SUBCASE("leave-one-out error shrinks as components are added") {
    std::vector<double> med_mse;
    for (int p = 1; p <= p_true; ++p) {
      std::vector<double> fold_mse;
      for (int hold = 0; hold < m; ++hold) {
        Matrix train_curves(m - 1, n), train_psi(m - 1, 2);
        int r = 0;
        for (int i = 0; i < m; ++i) {
          if (i == hold) continue;
          train_curves.row(r) = curves.row(i);
          train_psi.row(r) = psi.row(i);
          ++r;
        }
        const PCBasis pc = build_basis(train_curves, p);
        std::vector<WeightGp> models;
        for (int c = 0; c < pc.retained; ++c)
          models.push_back(fit_weight_gp(train_psi, pc.weights.col(c), c, 1e-8));
        const Vector pred = predict_spectrum(pc, models, psi.row(hold).transpose());
        fold_mse.push_back((pred - curves.row(hold).transpose()).squaredNorm() / n);
      }
      med_mse.push_back(median(fold_mse));
    }
    for (std::size_t p = 1; p < med_mse.size(); ++p) CHECK(med_mse[p] < med_mse[p - 1]);
  }
}
