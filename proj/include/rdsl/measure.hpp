#pragma once

#include "rdsl/common.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace rdsl {

class Model;

/// The four algebraic transforms of a map (and of a measure on maps).
/// Inverse and transpose commute on linear parts, so the set is a Klein
/// four-group; composition is XOR on the two bits.
enum class MapTransform : unsigned {
  Identity = 0,
  Inverse = 1,
  Transpose = 2,
  InverseTranspose = 3,
};

inline MapTransform compose(MapTransform a, MapTransform b) {
  return MapTransform(unsigned(a) ^ unsigned(b));
}

const char* to_string(MapTransform t);

/// One weighted map in a driving measure. `phase` is present exactly when
/// the atom belongs to a one-parameter family.
struct MapAtom {
  int map_id = 0;
  double weight = 1.0;
  std::optional<double> phase;
};

enum class MeasureKind { FiniteAtoms, ParametricUniformPhase, Convolution };

/// A probability measure on the maps of a model. Three kinds:
///  - FiniteAtoms: weighted atoms, weights summing to 1;
///  - ParametricUniformPhase: one family id, phase uniform on [0, period);
///  - Convolution: ordered factors, factor 0's sample applied first.
/// A transform tag on the leaves realizes the inverse / transpose /
/// inverse-transpose measures without touching the model tables.
struct DrivingMeasure {
  MeasureKind kind = MeasureKind::FiniteAtoms;

  // FiniteAtoms
  std::vector<MapAtom> atoms;

  // ParametricUniformPhase
  int family_map_id = 0;
  double phase_period = 0.0;

  // Convolution
  std::vector<DrivingMeasure> factors;

  // Applied to every sampled map of a leaf measure.
  MapTransform transform = MapTransform::Identity;

  static DrivingMeasure finite(std::vector<MapAtom> atoms);
  static DrivingMeasure uniform_on(const std::vector<int>& map_ids);
  static DrivingMeasure dirac(int map_id);
  static DrivingMeasure uniform_phase(int family_map_id, double period);
  static DrivingMeasure convolution(std::vector<DrivingMeasure> factors);

  /// Throws ConfigError on invariant violations (weights not summing to 1,
  /// empty factor list, ...).
  void validate() const;

  bool has_parametric_leaf() const;
  /// Letters appended to a word per draw (1 for leaves, sum over factors).
  int letters_per_draw() const;
  /// Support size of a single draw; throws UnsupportedError on parametric.
  std::int64_t support_per_draw() const;
};

/// One realized letter of a composition word.
struct Letter {
  int map_id = 0;
  double phase = 0.0;
  bool has_phase = false;
  MapTransform transform = MapTransform::Identity;
  double weight = 1.0;
};

/// A length-n composition word. letters[0] is applied first, matching the
/// convention that the n-fold composition applies the earliest sample first.
/// `draws` counts measure draws; convolution draws contribute several
/// letters each. For parametric letters the weight is a density placeholder
/// (1), so `weight` is the product over finite letters only.
struct Word {
  std::vector<Letter> letters;
  double weight = 1.0;
  int draws = 0;
};

/// Draw a word of n i.i.d. samples. Deterministic in (measure, n, seed):
/// draw i uses the counter-derived stream (seed, i), so results are
/// identical across runs and thread counts.
Word sample_word(const DrivingMeasure& measure, int n, std::uint64_t seed);

class RngStream;

/// One draw from the measure, streamed letter by letter without
/// materializing a Word. Orbit kernels use this; it consumes the stream in
/// the same order as sample_word.
void stream_draw(const DrivingMeasure& measure, RngStream& rng,
                 const std::function<void(const Letter&)>& sink);

/// All m^n words of a finitely supported measure with exact product weights.
/// Throws UnsupportedError for parametric measures and BudgetError (naming
/// m^n) when the support exceeds `cap`.
std::vector<Word> enumerate_words(const DrivingMeasure& measure, int n,
                                  std::int64_t cap);

/// The pushforward of a measure under inverse / transpose /
/// inverse-transpose. Inverse and transpose reverse convolution order;
/// inverse-transpose keeps it. When `model` is given, checks that the model
/// supports the requested transform (transpose needs linear maps).
DrivingMeasure transform_measure(const DrivingMeasure& measure,
                                 MapTransform kind,
                                 const Model* model = nullptr);

/// Work limits shared by the estimators: exact enumeration is used when the
/// word support fits `word_cap`, Monte Carlo with `mc_words` samples
/// otherwise.
struct Budget {
  std::int64_t word_cap = 1000000;
  std::int64_t mc_words = 100000;
};

struct DdGrid {
  int points_per_dim = 64;
};

/// Wasserstein-type distance between two finitely supported measures:
/// the optimal coupling of sqrt(dC2(f, g) + dC2(f^-1, g^-1)) over atom
/// pairs, where dC2 is the grid maximum of value / first / second
/// derivative discrepancies. The coupling LP is solved exactly.
double dd_distance(const Model& model_a, const DrivingMeasure& mu_a,
                   const Model& model_b, const DrivingMeasure& mu_b,
                   const DdGrid& grid = {});

/// Exact solver for the balanced transportation problem
///   min sum_ij pi_ij c_ij  s.t. row sums = supply, column sums = demand.
/// Supplies and demands must each sum to the same total. Used by
/// dd_distance; exposed for testing.
double transport_lp(const Mat& cost, const Vec& supply, const Vec& demand);

}  // namespace rdsl
