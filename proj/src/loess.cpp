#include "specemu/loess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "specemu/errors.hpp"

namespace specemu {

Vector loess_smooth(const Vector& y, const Vector& x, double span) {
  const Eigen::Index n = x.size();
  if (y.size() != n) throw DimensionMismatch("loess_smooth: x/y length mismatch");
  if (!(span > 0.0 && span <= 1.0)) throw InvalidParameter("loess_smooth: span must be in (0, 1]");
  if (n < 5) throw InvalidParameter("loess_smooth: need at least 5 points");

  const Eigen::Index window =
      std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::ceil(span * static_cast<double>(n))));
  // tricube zeroes out the farthest neighbor, so keep enough points for a
  // well-posed quadratic fit
  const Eigen::Index q = std::max<Eigen::Index>(window, 5);

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);

  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x0 = x(i);
    // q nearest neighbors by |x - x0|
    std::vector<Eigen::Index> nb = idx;
    std::nth_element(nb.begin(), nb.begin() + (q - 1), nb.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return std::abs(x(a) - x0) < std::abs(x(b) - x0);
                     });
    nb.resize(static_cast<std::size_t>(q));
    double h = 0.0;
    for (Eigen::Index j : nb) h = std::max(h, std::abs(x(j) - x0));
    if (h == 0.0) throw SingularMatrix("loess_smooth: degenerate window, all x identical");

    Matrix xtw_x = Matrix::Zero(3, 3);
    Vector xtw_y = Vector::Zero(3);
    for (Eigen::Index j : nb) {
      const double t = std::abs(x(j) - x0) / h;
      const double u = 1.0 - t * t * t;
      const double w = (t < 1.0) ? u * u * u : 0.0;
      const double dx = x(j) - x0;
      Eigen::Vector3d row(1.0, dx, dx * dx);
      xtw_x += w * row * row.transpose();
      xtw_y += w * y(j) * row;
    }
    Eigen::LDLT<Matrix> solve(xtw_x);
    const double fitted = solve.solve(xtw_y)(0);
    if (solve.info() != Eigen::Success || !std::isfinite(fitted))
      throw SingularMatrix("loess_smooth: singular local fit");
    out(i) = fitted;
  }
  return out;
}

}  // namespace specemu
