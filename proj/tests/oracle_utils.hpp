#pragma once

// Shared independent oracles for the test suites. Everything here is kept
// deliberately separate from the library implementation paths it checks.

#include "rdsl/common.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

/// Chi-square goodness-of-fit p-value for observed counts against expected
/// probabilities.
inline double chi_square_p(const std::vector<std::int64_t>& counts,
                           const std::vector<double>& probs) {
  double total = 0.0;
  for (const auto c : counts) total += double(c);
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = total * probs[i];
    const double diff = double(counts[i]) - expected;
    stat += diff * diff / expected;
  }
  boost::math::chi_squared dist(double(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Kolmogorov-Smirnov statistic of samples against the uniform law on
/// [0, period).
inline double ks_uniform(std::vector<double> samples, double period) {
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = samples[i] / period;
    d = std::max(d, std::fabs(f - double(i + 1) / n));
    d = std::max(d, std::fabs(f - double(i) / n));
  }
  return d;
}

/// Asymptotic KS critical value at level alpha = 0.01.
inline double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(double(n)); }

/// Bessel J_m by trapezoid quadrature of the integral representation
/// (spectrally accurate for smooth periodic integrands); independent of the
/// library's evaluation path.
inline double bessel_j_quadrature(int m, double z, int points = 2048) {
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double theta = 2.0 * std::numbers::pi * double(i) / points;
    acc += std::cos(m * theta - z * std::sin(theta));
  }
  return acc / points;
}

/// Exact optimal transport for uniform marginals of equal size: by
/// Birkhoff's theorem the optimum is attained at a permutation coupling.
inline double brute_force_uniform_transport(const rdsl::Mat& cost) {
  const int n = int(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[std::size_t(i)] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[std::size_t(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / double(n);
}

/// Central finite-difference Jacobian of a torus map (for derivative
/// cross-checks).
template <class F>
rdsl::Mat fd_jacobian(F&& f, const rdsl::Vec& x, double h = 1e-6) {
  const int d = int(x.size());
  rdsl::Mat jac(d, d);
  for (int j = 0; j < d; ++j) {
    rdsl::Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const rdsl::Vec fp = f(xp);
    const rdsl::Vec fm = f(xm);
    for (int i = 0; i < d; ++i) {
      // Unwrap across the periodic boundary.
      double diff = fp[i] - fm[i];
      diff -= std::round(diff);
      jac(i, j) = diff / (2.0 * h);
    }
  }
  return jac;
}

}  // namespace oracle
