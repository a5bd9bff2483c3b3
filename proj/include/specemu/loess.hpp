#pragma once

#include "specemu/kernels.hpp"

namespace specemu {

// Local quadratic regression with tricube weights, evaluated at each x_i
// over the nearest ceil(span * n) points. 0 < span <= 1, n >= 5.
Vector loess_smooth(const Vector& y, const Vector& x, double span = 0.75);

}  // namespace specemu
