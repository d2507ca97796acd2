#pragma once

#include <cmath>

namespace rdsl {

/// Bessel function of the first kind, integer order, any real argument.
/// Wraps std::cyl_bessel_j (defined for m >= 0, z >= 0) with the standard
/// reflection rules J_{-m}(z) = (-1)^m J_m(z) and J_m(-z) = (-1)^m J_m(z).
inline double bessel_j(int m, double z) {
  double sign = 1.0;
  if (m < 0) {
    m = -m;
    if (m & 1) sign = -sign;
  }
  if (z < 0.0) {
    z = -z;
    if (m & 1) sign = -sign;
  }
  if (z == 0.0) return m == 0 ? sign : 0.0;
  return sign * std::cyl_bessel_j(double(m), z);
}

}  // namespace rdsl
