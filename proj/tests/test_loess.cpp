#include <doctest.h>

#include <cmath>

#include "specemu/loess.hpp"
#include "specemu/rng.hpp"

using namespace specemu;

TEST_CASE("loess reproduces quadratics exactly") {
  const int n = 25;
  Vector x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = 0.17 * i - 1.0;
    y(i) = 2.0 - 0.5 * x(i) + 0.8 * x(i) * x(i);
  }
  for (double span : {0.2, 0.5, 1.0}) {
    const Vector s = loess_smooth(y, x, span);
    CHECK((s - y).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("loess keeps constants") {
  Vector x(10), y = Vector::Constant(10, 3.5);
  for (int i = 0; i < 10; ++i) x(i) = i;
  const Vector s = loess_smooth(y, x, 0.75);
  CHECK((s - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("loess reduces noise on a sine") {
  const int n = 80;
  Vector x(n), y(n), clean(n);
  Rng rng(17);
  double noise_var = 0.0;
  for (int i = 0; i < n; ++i) {
    x(i) = 6.0 * i / (n - 1);
    clean(i) = std::sin(x(i));
    const double eps = 0.2 * rng.normal();
    noise_var += eps * eps;
    y(i) = clean(i) + eps;
  }
  noise_var /= n;
  const Vector s = loess_smooth(y, x, 0.3);
  const double resid_var = (s - clean).squaredNorm() / n;
  CHECK(resid_var < noise_var);
}

TEST_CASE("loess error paths") {
  Vector x = Vector::Zero(10);  // all identical
  Vector y = Vector::LinSpaced(10, 0.0, 1.0);
  CHECK_THROWS_AS(loess_smooth(y, x, 0.75), SingularMatrix);
  Vector x2 = Vector::LinSpaced(4, 0.0, 1.0);
  CHECK_THROWS_AS(loess_smooth(Vector::Zero(4), x2, 0.75), InvalidParameter);
  Vector x3 = Vector::LinSpaced(10, 0.0, 1.0);
  CHECK_THROWS_AS(loess_smooth(Vector::Zero(10), x3, 0.0), InvalidParameter);
  CHECK_THROWS_AS(loess_smooth(Vector::Zero(10), x3, 1.5), InvalidParameter);
}
