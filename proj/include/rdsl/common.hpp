#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace rdsl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Configuration / precondition violations (bad weights, bad parameters).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested operation is not defined for the given model/measure.
class UnsupportedError : public std::runtime_error {
 public:
  explicit UnsupportedError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A work estimate exceeded the configured budget.
class BudgetError : public std::runtime_error {
 public:
  explicit BudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Execution policy for the data-parallel kernels. Serial is the reference
/// path; Parallel uses OpenMP. Both produce bit-identical results because
/// every sample owns a counter-derived RNG stream and reductions run in a
/// fixed order over materialized buffers.
enum class Exec { Serial, Parallel };

template <class F>
inline void for_each_index(std::int64_t n, Exec exec, F&& f) {
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) f(i);
  }
}

inline int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Pairwise (tree) summation over a fixed index order. Thread-count
/// independent and more accurate than naive accumulation.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline double pairwise_sum(std::span<const double> v) {
  return pairwise_sum(v.data(), v.size());
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error of a sample buffer, deterministic reduction.
inline MeanStderr mean_stderr(std::span<const double> v) {
  MeanStderr out;
  const std::size_t n = v.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(v) / double(n);
  if (n >= 2) {
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - out.mean;
      sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / double(n - 1);
    out.stderr_ = std::sqrt(var / double(n));
  }
  return out;
}

/// Reduce a real number to the fundamental domain [0,1) of the circle.
inline double torus_reduce(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r -= 1.0;  // guards x = -eps rounding to 1.0
  return r;
}

/// Distance on the circle R/Z.
inline double circle_dist(double a, double b) {
  const double d = std::fabs(torus_reduce(a) - torus_reduce(b));
  return std::min(d, 1.0 - d);
}

/// A point on the torus R^d/Z^d; coordinates are reduced on construction.
class TorusPoint {
 public:
  TorusPoint() = default;
  explicit TorusPoint(Vec coords) : x_(std::move(coords)) {
    for (Eigen::Index i = 0; i < x_.size(); ++i) x_[i] = torus_reduce(x_[i]);
  }
  const Vec& coords() const { return x_; }
  int dimension() const { return int(x_.size()); }

  static TorusPoint zero(int d) { return TorusPoint(Vec::Zero(d)); }

 private:
  Vec x_;
};

/// Euclidean distance between torus points (per-coordinate wrap).
inline double torus_dist(const TorusPoint& a, const TorusPoint& b) {
  double s = 0.0;
  for (int i = 0; i < a.dimension(); ++i) {
    const double d = circle_dist(a.coords()[i], b.coords()[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

/// FNV-1a over bytes; used for config/model provenance hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace rdsl
