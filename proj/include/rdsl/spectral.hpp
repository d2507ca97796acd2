#pragma once

#include "rdsl/common.hpp"
#include "rdsl/measure.hpp"
#include "rdsl/models.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <string>
#include <vector>

namespace rdsl {

/// Integer frequency vector (length d).
using Mode = std::vector<std::int64_t>;

/// The truncated frequency lattice ||k||_inf <= K in d dimensions, with a
/// fixed linear indexing (component 0 fastest).
struct ModeBox {
  int d = 2;
  int K = 1;

  std::int64_t side() const { return 2 * std::int64_t(K) + 1; }
  std::int64_t size() const {
    std::int64_t s = 1;
    for (int i = 0; i < d; ++i) s *= side();
    return s;
  }
  bool contains(const Mode& k) const {
    for (int i = 0; i < d; ++i)
      if (k[std::size_t(i)] < -K || k[std::size_t(i)] > K) return false;
    return true;
  }
  std::int64_t index_of(const Mode& k) const {
    std::int64_t idx = 0, stride = 1;
    for (int i = 0; i < d; ++i) {
      idx += (k[std::size_t(i)] + K) * stride;
      stride *= side();
    }
    return idx;
  }
  Mode mode_of(std::int64_t idx) const {
    Mode k(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      k[std::size_t(i)] = idx % side() - K;
      idx /= side();
    }
    return k;
  }
  std::int64_t zero_index() const { return index_of(Mode(std::size_t(d), 0)); }
  double norm2_of(std::int64_t idx) const {
    const Mode k = mode_of(idx);
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += double(k[std::size_t(i)]) * double(k[std::size_t(i)]);
    return s;
  }
};

/// The averaged composition operator on the mode box. Entries are stored
/// unweighted; Sobolev weighting is a diagonal similarity applied on demand.
/// `truncation_loss` records, per column, the absolute entry mass that fell
/// outside the box during assembly.
struct FourierOperator {
  ModeBox box;
  double s_default = 0.0;
  std::uint64_t model_hash = 0;
  bool diagonal = false;
  CVec diag;  // valid when diagonal
  Eigen::SparseMatrix<Complex> mat;
  Vec truncation_loss;

  std::int64_t dim() const { return box.size(); }
  double max_truncation_loss() const {
    return truncation_loss.size() ? truncation_loss.maxCoeff() : 0.0;
  }
  /// Sobolev mode weight (1 + ||k||^2)^{s/2}.
  double weight(std::int64_t idx, double s) const {
    return std::pow(1.0 + box.norm2_of(idx), 0.5 * s);
  }
  CVec apply(const CVec& c) const;
  CMat dense() const;
  /// D M D^{-1} with D = diag((1+||k||^2)^{s/2}).
  CMat dense_weighted(double s) const;
};

/// Assemble the operator for an affine model (exact mode pushforward with
/// phases), the alternating-shear model (exact Bessel columns; uniform
/// phases give the diagonal, finite phase sets give coupled columns), or
/// 2-point products of these.
FourierOperator build_galerkin(const Model& model, const DrivingMeasure& mu,
                               int K, double s);

/// The measure of the alternating-shear model with phases restricted to the
/// Q-point grid {j/Q}: the exact finite average used by the stability sweep.
DrivingMeasure pierrehumbert_discrete_phases(int Q);

struct SpectrumOptions {
  std::int64_t dense_limit = 1200;  // full dense solve up to this dimension
  int block = 64;                   // subspace-iteration block beyond it
  int iters = 500;
};

struct SpectralReport {
  /// Sorted by modulus, descending. Full spectrum on the dense path; the
  /// constant eigenvalue plus the top Ritz values otherwise.
  std::vector<Complex> eigenvalues;
  bool full_spectrum = true;
  /// Largest-modulus eigenvalue after deflating the constant mode.
  Complex subleading = 0.0;
  double subleading_modulus = 0.0;
  /// Count of eigenvalues with modulus within 1e-8 of 1 (constants included).
  int unit_multiplicity = 0;
  /// Columns of the assembled matrix that equal their own basis mode exactly.
  int fixed_mode_count = 0;
  /// True when no non-constant eigenvalue has modulus within 1e-6 of 1.
  bool weak_mixing_pass = true;
  std::string diagnostic;
};

SpectralReport operator_spectrum(const FourierOperator& op, double s,
                                 const SpectrumOptions& opts = {});

/// Largest singular value of the weighted matrix (power iteration on M*M).
double operator_norm_estimate(const FourierOperator& op, double s,
                              int iters = 300);

struct EssentialRadiusReport {
  double eta_hat = 1.0;
  double slope = 0.0;
  double fit_residual = 0.0;
  int window_lo = 1, window_hi = 1;
  bool gapless = false;
  double s = 0.0;
  std::vector<Mode> probes;
  /// rho(p, n-1): weighted amplitude mass of mode p after n exact steps,
  /// relative to its starting mass.
  Mat rho;
  Vec rho_max;    // per n, max over probes
  Vec lemma_lhs;  // per n, Monte Carlo sup over probe covectors
};

/// High-frequency decay-rate surrogate for the essential spectral radius:
/// exact word-sum propagation of probe modes on the infinite lattice with
/// H^{-s} amplitude weighting (collisions merge before taking magnitudes),
/// plus the Monte Carlo cotangent-power comparison value.
EssentialRadiusReport essential_radius_estimate(
    const Model& model, const DrivingMeasure& mu, double s, double r,
    int n_max, const std::vector<Mode>& probes, const Budget& budget,
    std::uint64_t seed);

struct LasotaYorkeReport {
  double eta = 1.0;
  double s = 0.0, s_bar = 0.5;
  std::vector<int> n_list;
  std::vector<double> C_n;
  bool feasible = false;  // eta < 1
  bool gapless = false;
  double max_growth_ratio = 0.0;  // max C_{n_{i+1}} / C_{n_i}
  EssentialRadiusReport radius;
};

/// Minimal constants C_n such that the two-norm inequality
/// |G^n phi|_{-s} <= eta^n |phi|_{-s} + C_n |phi|_{-s_bar} holds over the
/// probe modes, with eta taken from the essential-radius fit.
LasotaYorkeReport lasota_yorke_fit(const Model& model, const DrivingMeasure& mu,
                                   double s, double s_bar,
                                   const std::vector<int>& n_list,
                                   const std::vector<Mode>& probes,
                                   const Budget& budget, std::uint64_t seed);

struct StabilityMember {
  std::string label;
  Model model;
  DrivingMeasure mu;
};

struct StabilityPoint {
  std::string label;
  Complex subleading = 0.0;
  double subleading_modulus = 0.0;
  double deviation = 0.0;  // |lambda - lambda_base|
  std::optional<double> dd;
  double max_truncation_loss = 0.0;
};

/// Subleading-eigenvalue trajectories of a perturbation family, with the
/// transport distance to the base measure whenever both are finite.
std::vector<StabilityPoint> stability_sweep(const Model& base_model,
                                            const DrivingMeasure& base_mu,
                                            const std::vector<StabilityMember>& family,
                                            int K, double s,
                                            const SpectrumOptions& opts = {});

/// Portable on-disk operator format: header (magic, d, K, s, model hash,
/// dim) followed by column-major complex entries as little-endian doubles.
void export_operator(const FourierOperator& op, const std::string& path);
FourierOperator import_operator(const std::string& path);

}  // namespace rdsl
