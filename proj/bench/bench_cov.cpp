#include <chrono>
#include <cstdio>
#include <functional>

#include "specemu/kernels.hpp"
#include "specemu/rng.hpp"

using namespace specemu;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

}  // namespace

int main() {
  Rng rng(12345);

  std::printf("%-28s %8s %12s %12s %8s\n", "kernel", "size", "serial ms", "parallel ms",
              "speedup");

  for (int n : {256, 512, 1024, 2048}) {
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.uniform(-3.0, 1.0);
    const MaternParams params{0.25, 1.0, 1e-8};
    const int reps = n <= 512 ? 50 : 10;

    volatile double sink = 0.0;
    const double serial = time_ms([&] { sink = sink + matern52_matrix_serial(x, params)(0, 1); }, reps);
    const double parallel = time_ms([&] { sink = sink + matern52_matrix(x, params)(0, 1); }, reps);
    const Matrix a = matern52_matrix_serial(x, params);
    const Matrix b = matern52_matrix(x, params);
    if (!a.isApprox(b, 0.0)) {
      std::fprintf(stderr, "matern52 builders disagree at n=%d\n", n);
      return 1;
    }
    std::printf("%-28s %8d %12.3f %12.3f %7.2fx\n", "matern52_matrix", n, serial, parallel,
                serial / parallel);
  }

  for (int m : {128, 256, 512, 1024}) {
    const int p = 8;
    Matrix psi(m, p);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p; ++j) psi(i, j) = rng.uniform();
    PowExpParams params;
    params.beta = Vector::Constant(p, 0.5);
    params.nugget = 1e-8;
    const int reps = m <= 256 ? 50 : 10;

    volatile double sink = 0.0;
    const double serial =
        time_ms([&] { sink = sink + powexp_corr_matrix_serial(psi, params)(0, 1); }, reps);
    const double parallel = time_ms([&] { sink = sink + powexp_corr_matrix(psi, params)(0, 1); }, reps);
    const Matrix a = powexp_corr_matrix_serial(psi, params);
    const Matrix b = powexp_corr_matrix(psi, params);
    if (!a.isApprox(b, 0.0)) {
      std::fprintf(stderr, "powexp builders disagree at m=%d\n", m);
      return 1;
    }
    std::printf("%-28s %8d %12.3f %12.3f %7.2fx\n", "powexp_corr_matrix", m, serial, parallel,
                serial / parallel);
  }

  return 0;
}
