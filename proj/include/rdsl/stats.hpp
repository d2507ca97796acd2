#pragma once

#include "rdsl/common.hpp"
#include "rdsl/measure.hpp"
#include "rdsl/models.hpp"
#include "rdsl/spectral.hpp"

#include <string>
#include <vector>

namespace rdsl {

/// A band-limited observable: finitely many Fourier coefficients.
struct Observable {
  int d = 2;
  std::vector<std::pair<Mode, Complex>> coeffs;

  /// amplitude * cos(2 pi <k, x>).
  static Observable cosine(const Mode& k, double amplitude = 1.0);

  Complex eval(const TorusPoint& x) const;
  double eval_real(const TorusPoint& x) const;
  double l2_norm2() const;  // sum |c_k|^2
  bool zero_mean(double tol = 1e-12) const;
  /// Conjugate symmetry c_{-k} = conj(c_k) within tol.
  bool real_valued(double tol = 1e-12) const;
  int max_abs_mode() const;
};

/// Plancherel pairing sum conj(phi_k) psi_k = integral conj(phi) psi.
Complex inner_product(const Observable& phi, const Observable& psi);

enum class SeriesMethod { Operator, MonteCarlo };

struct CorrelationSeries {
  std::vector<Complex> values;  // n = 0 .. n_max
  std::vector<double> stderrs;  // zero for the operator method
  SeriesMethod method = SeriesMethod::Operator;
};

/// <phi, G^n psi> by repeated operator application, exact on the box.
CorrelationSeries correlation_series_operator(const FourierOperator& op,
                                              const Observable& phi,
                                              const Observable& psi, int n_max);

/// Monte Carlo pair correlations: average of conj(phi(x0)) psi(x_n) over
/// sampled words and uniform initial points; one orbit serves every n.
CorrelationSeries correlation_series_mc(const Model& model,
                                        const DrivingMeasure& mu,
                                        const Observable& phi,
                                        const Observable& psi, int n_max,
                                        std::int64_t samples,
                                        std::uint64_t seed,
                                        Exec exec = Exec::Parallel);

struct MixingFit {
  enum class Flag { Ok, BelowNoise, NoDecay };
  double theta_hat = 1.0;
  int window_lo = 0, window_hi = 0;
  double residual = 0.0;
  Flag flag = Flag::BelowNoise;
};

/// Least-squares decay rate of ln |values| over the longest window where the
/// series clears the noise floor (10x stderr for Monte Carlo, 1e-13 for
/// operator series).
MixingFit mixing_rate_fit(const CorrelationSeries& series);

struct TripleResult {
  Complex value = 0.0;
  double stderr_ = 0.0;
  bool mc_fallback = false;
};

/// E[ integral phi0 . G^{n1}(phi1 . G^{n2-n1} phi2) dx ]. The operator route
/// multiplies in mode space (convolution) and throws BudgetError when a
/// product mode leaves the box; the Monte Carlo route averages
/// phi0(x_0) phi1(x_{n1}) phi2(x_{n2}) along sampled orbits.
TripleResult triple_correlation_operator(const FourierOperator& op,
                                         const Observable& phi0,
                                         const Observable& phi1,
                                         const Observable& phi2, int n1,
                                         int n2);
TripleResult triple_correlation_mc(const Model& model, const DrivingMeasure& mu,
                                   const Observable& phi0,
                                   const Observable& phi1,
                                   const Observable& phi2, int n1, int n2,
                                   std::int64_t samples, std::uint64_t seed,
                                   Exec exec = Exec::Parallel);

struct GreenKuboReport {
  double sigma2 = 0.0;
  bool available = false;
  double partial_sum = 0.0;
  double tail_bound = 0.0;
  int n_max = 0;
  MixingFit fit;
  std::string diagnostic;
  CorrelationSeries series;
};

/// sigma^2 = |phi|_{L2}^2 + 2 sum_{n>=1} <phi, G^n phi>, summed to n_max
/// with a geometric tail bound at the fitted rate. A non-decaying series
/// yields an unavailable report instead of a number.
GreenKuboReport green_kubo_variance(const FourierOperator& op,
                                    const Observable& phi, int n_max);

struct CLTReport {
  double sigma2_gk = 0.0;
  bool gk_available = false;
  double sigma2_mc = 0.0;
  double ks_distance = 1.0;
  std::int64_t N = 0;
  std::int64_t trials = 0;
  bool degenerate_zero = false;     // all normalized sums vanish
  bool used_empirical_variance = false;
  std::string diagnostic;
};

/// Distribution of S_N / sqrt(N) over independent (word, uniform start)
/// trials, compared against the centered Gaussian with the Green-Kubo
/// variance (or the empirical one, flagged, when that is unavailable).
CLTReport clt_experiment(const Model& model, const DrivingMeasure& mu,
                         const Observable& phi, std::int64_t N,
                         std::int64_t trials, std::uint64_t seed,
                         const GreenKuboReport& gk,
                         Exec exec = Exec::Parallel);

struct BerryEsseenRow {
  std::int64_t N = 0;
  double ks = 0.0;
  double sqrtN_ks = 0.0;
};

struct BerryEsseenReport {
  std::vector<BerryEsseenRow> rows;
  double max_sqrtN_ks = 0.0;
  bool increasing_trend = false;  // Mann-Kendall at level 0.05
  double mk_p_value = 1.0;
};

BerryEsseenReport berry_esseen_scaling(const Model& model,
                                       const DrivingMeasure& mu,
                                       const Observable& phi,
                                       const std::vector<std::int64_t>& N_list,
                                       std::int64_t trials, std::uint64_t seed,
                                       const GreenKuboReport& gk,
                                       Exec exec = Exec::Parallel);

/// Sup-distance between the sample's empirical CDF and the centered
/// Gaussian CDF with variance sigma2.
double ks_distance_gaussian(std::vector<double> samples, double sigma2);

/// One-sided Mann-Kendall p-value for an increasing trend; exact over
/// permutations for short sequences (n <= 8).
double mann_kendall_increasing_p(const std::vector<double>& values);

}  // namespace rdsl
