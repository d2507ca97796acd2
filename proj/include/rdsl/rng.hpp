#pragma once

#include <cstdint>
#include <cmath>

namespace rdsl {

namespace detail {
// SplitMix64 finalizer. Good avalanche, cheap, and stateless, which is what
// counter-based stream derivation needs.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Derive an independent sub-seed from (seed, index). Used to give every
/// Monte Carlo sample its own stream so parallel and serial runs agree
/// bit-for-bit.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  return detail::mix64(seed ^ detail::mix64(index ^ 0xD1B54A32D192ED03ULL));
}

/// Small counter-based generator (SplitMix64 core). One instance per sample
/// or per trial; never shared across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(split_seed(seed, stream)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0,1), 53-bit resolution.
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0,n). Lemire multiply-shift; the 2^-64 bias is
  /// irrelevant at our sample counts.
  std::uint32_t next_index(std::uint32_t n) {
    return std::uint32_t((__uint128_t(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (pairwise, cached).
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rdsl
