#pragma once

#include "rdsl/common.hpp"
#include "rdsl/measure.hpp"
#include "rdsl/models.hpp"

#include <optional>

namespace rdsl {

/// Base point plus a unit covector.
struct CotangentFrame {
  TorusPoint base;
  Vec covector;

  void validate() const;
};

/// Base point plus k orthonormal column vectors spanning a k-plane.
struct PlaneFrame {
  TorusPoint base;
  Mat basis;  // d x k, orthonormal columns

  void validate() const;
  int k() const { return int(basis.cols()); }
};

enum class EstimateMode { ExactEnumeration, MonteCarlo };
enum class CocycleKind { Tangent, Cotangent };

struct Witness {
  TorusPoint base;
  Mat frame;  // d x 1 vector/covector, or d x k plane basis
};

/// An expansion-on-average integral estimate, reported per composition step.
struct ExpansionEstimate {
  double value = 0.0;    // nats per step
  double stderr_ = 0.0;  // 0 in exact mode
  std::int64_t samples = 0;
  EstimateMode mode = EstimateMode::MonteCarlo;
  int steps = 1;  // N, so the total over the word is value * steps
  bool fell_back_to_monte_carlo = false;
  Witness witness;
};

/// Log-growth of a unit covector under the inverse-transpose derivative
/// cocycle along one word (total over the word, not per step).
double cotangent_log_growth(const Model& model, const Word& word,
                            const TorusPoint& x, const Vec& covector);
/// Log-growth of a unit vector under the derivative cocycle along one word.
double tangent_log_growth(const Model& model, const Word& word,
                          const TorusPoint& x, const Vec& vector);
/// Log of the covolume growth factor of an orthonormal k-frame along one
/// word, via stepwise Gram determinants with re-orthonormalization.
double covolume_log_growth(const Model& model, const Word& word,
                           const TorusPoint& x, const Mat& basis);

/// Average of N^{-1} log ||cocycle . frame|| over words of N draws: exact
/// enumeration when the measure's support fits the budget, Monte Carlo
/// otherwise (or when enumeration overflows, with a fallback flag).
ExpansionEstimate cotangent_expansion(const Model& model,
                                      const DrivingMeasure& mu, int N,
                                      const CotangentFrame& frame,
                                      const Budget& budget,
                                      std::uint64_t seed,
                                      Exec exec = Exec::Parallel);

ExpansionEstimate tangent_expansion(const Model& model,
                                    const DrivingMeasure& mu, int N,
                                    const TorusPoint& base, const Vec& vector,
                                    const Budget& budget, std::uint64_t seed,
                                    Exec exec = Exec::Parallel);

ExpansionEstimate kplane_expansion(const Model& model, const DrivingMeasure& mu,
                                   int N, const PlaneFrame& plane,
                                   const Budget& budget, std::uint64_t seed,
                                   Exec exec = Exec::Parallel);

/// Covolume growth of a (d-1)-plane along one word next to the growth of its
/// unit conormal under the inverse-transpose cocycle. For volume-preserving
/// words the two agree.
struct ConormalCheck {
  double covolume_growth;
  double conormal_growth;
};
ConormalCheck conormal_check(const Model& model, const Word& word,
                             const PlaneFrame& plane);

/// Search plan for the infimum over (base point, unit covector) frames.
/// Negative fields select the dimension-dependent defaults: a 16^d base
/// lattice for d <= 2 (8^d for d in {3,4}, one point for constant-derivative
/// models), 64 circle directions for d = 2 and 256 low-discrepancy sphere
/// directions for d >= 3, and 3 refinement rounds of coordinate descent with
/// step halving around the incumbent.
struct SearchPlan {
  int base_points_per_dim = -1;
  int directions = -1;
  int refine_rounds = 3;
  double initial_step = -1.0;
};

/// Minimum of the per-step expansion over the search frames, with witness.
ExpansionEstimate expansion_lambda(const Model& model, const DrivingMeasure& mu,
                                   int N, CocycleKind kind,
                                   const SearchPlan& plan, const Budget& budget,
                                   std::uint64_t seed,
                                   Exec exec = Exec::Parallel);

struct LyapunovReport {
  Vec exponents;     // sorted descending
  Vec confidence;    // half-width per exponent from 20 batch means
  std::int64_t orbit_length = 0;
  int reorth_period = 1;
  bool retried = false;  // re-orthonormalization period was decreased once
};

/// Benettin / QR scheme along one random orbit.
LyapunovReport lyapunov_spectrum(const Model& model, const DrivingMeasure& mu,
                                 std::int64_t T, const TorusPoint& x0,
                                 std::uint64_t seed, int reorth_period = 1);

struct FurstenbergEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t samples = 0;
};

/// Double integral of log ||F v|| against the empirical projective
/// stationary measure: drive a projective orbit for burn_in steps, then
/// average the one-step log-growth. Standard error from 20 batch means.
FurstenbergEstimate furstenberg_integral(const Model& model,
                                         const DrivingMeasure& mu,
                                         std::int64_t burn_in,
                                         std::int64_t samples,
                                         std::uint64_t seed,
                                         std::optional<Vec> v0 = std::nullopt);

}  // namespace rdsl
