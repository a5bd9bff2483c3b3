#include <doctest.h>

#include <cmath>
#include <random>

#include "specemu/kernels.hpp"

using namespace specemu;

TEST_CASE("matern52 point values") {
  CHECK(matern52(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  // (1 + sqrt(5) + 5/3) exp(-sqrt(5)), evaluated at 30 digits
  CHECK(matern52(1.0, 1.0) == doctest::Approx(0.52399410883182031).epsilon(1e-14));
  const double tail = matern52(1e6, 1.0);
  CHECK(std::isfinite(tail));
  CHECK(tail >= 0.0);
  CHECK(tail < 1e-300);
  CHECK_THROWS_AS(matern52(1.0, 0.0), InvalidParameter);
  CHECK_THROWS_AS(matern52(1.0, -2.0), InvalidParameter);
}

TEST_CASE("matern52 monotone nonincreasing in d") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double theta = 0.01 + unif(gen);
    double d1 = unif(gen), d2 = unif(gen);
    if (d1 > d2) std::swap(d1, d2);
    CHECK(matern52(d1, theta) >= matern52(d2, theta));
  }
}

TEST_CASE("matern52_matrix basics") {
  SUBCASE("identical points give all ones") {
    Vector pts = Vector::Zero(4);
    const Matrix m = matern52_matrix(pts, {1.0, 1.0, 0.0});
    CHECK((m - Matrix::Ones(4, 4)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("n = 1") {
    Vector pts(1);
    pts << 0.3;
    const Matrix m = matern52_matrix(pts, {1.0, 2.0, 0.5});
    CHECK(m.rows() == 1);
    CHECK(m(0, 0) == doctest::Approx(2.5));
  }
  SUBCASE("sigma_A setting is PSD with the stated diagonal") {
    Vector x(41);
    for (int i = 0; i <= 40; ++i) x(i) = 0.1 * i;
    const Matrix m = matern52_matrix(x, {0.01, 0.0225, 0.0});
    for (int i = 0; i < 41; ++i) CHECK(m(i, i) == doctest::Approx(0.0225));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("matern52_matrix symmetric PSD on random point sets") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial;
    Vector pts(n);
    for (int i = 0; i < n; ++i) pts(i) = unif(gen);
    MaternParams params{0.05 + 0.1 * trial, 1.3, 0.0};
    const Matrix m = matern52_matrix(pts, params);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    params.jitter = 1e-8;
    const Matrix mj = matern52_matrix(pts, params);
    Eigen::LLT<Matrix> llt(mj);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("parallel builder matches serial reference bitwise") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  Vector pts(257);
  for (int i = 0; i < 257; ++i) pts(i) = unif(gen);
  const MaternParams params{0.3, 0.8, 1e-8};
  const Matrix a = matern52_matrix_serial(pts, params);
  const Matrix b = matern52_matrix(pts, params);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  Matrix psi(64, 3);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 3; ++j) psi(i, j) = unif(gen);
  PowExpParams pe;
  pe.beta = Vector::Zero(3);
  pe.beta << -1.0, 0.0, 1.0;
  pe.nugget = 1e-8;
  const Matrix ra = powexp_corr_matrix_serial(psi, pe);
  const Matrix rb = powexp_corr_matrix(psi, pe);
  CHECK((ra - rb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("powexp_corr values") {
  PowExpParams p1;
  p1.beta = Vector::Zero(1);
  Vector u(1), v(1);
  u << 0.2;
  v << 0.2;
  CHECK(powexp_corr(u, v, p1) == doctest::Approx(1.0));
  v << 1.2;
  CHECK(powexp_corr(u, v, p1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  PowExpParams p2;
  p2.beta = Vector(2);
  p2.beta << 0.0, 1.0;
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 0.5, 0.5;
  // exp(-(0.5^1.95)) * exp(-10 * 0.5^1.95), 30-digit evaluation
  CHECK(powexp_corr(a, b, p2) == doctest::Approx(0.058019359446785726).epsilon(1e-14));

  Vector bad(3);
  CHECK_THROWS_AS(powexp_corr(a, bad, p2), DimensionMismatch);
}

TEST_CASE("powexp_corr limits") {
  PowExpParams p;
  p.beta = Vector::Constant(2, -30.0);  // lengthscales -> infinity
  Vector a(2), b(2);
  a << -5.0, 2.0;
  b << 7.0, -1.0;
  CHECK(powexp_corr(a, b, p) == doctest::Approx(1.0).epsilon(1e-12));

  PowExpParams gauss;
  gauss.beta = Vector::Constant(1, 0.7);
  gauss.alpha = 2.0;
  Vector u(1), v(1);
  u << 0.1;
  v << 0.9;
  const double expect = std::exp(-std::pow(10.0, 0.7) * 0.8 * 0.8);
  CHECK(powexp_corr(u, v, gauss) == doctest::Approx(expect).epsilon(1e-14));
}
