#pragma once

#include "rdsl/common.hpp"
#include "rdsl/measure.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rdsl {

enum class ModelVariant {
  AffineTorus,
  Pierrehumbert,
  StandardMap,
  LinearCocycle,
  ProductLift,
};

const char* to_string(ModelVariant v);

/// Compact description of the powered-base-plus-shear matrix family on a
/// 2k-dimensional fiber: atoms are block-diagonal lifts diag(W, Id) of all
/// words W of length `power` in the 2x2 `base` tuple (each with half the
/// mass, uniformly) together with the constant shear [[Id,0],[L*Id,Id]]
/// carrying the other half.
struct BlockShearSpec {
  std::vector<Mat> base;  // 2x2 integer matrices
  int power = 1;
  double shear_strength = 10.0;
};

struct ModelConfig {
  ModelVariant variant = ModelVariant::AffineTorus;
  int dimension = 2;

  // AffineTorus: f_j(x) = A_j x + b_j with A_j integer, |det| = 1.
  std::vector<Mat> matrices;
  std::vector<Vec> offsets;
  std::vector<double> weights;  // optional; default uniform

  // Pierrehumbert: alternating sinusoidal shears with random phases,
  // normalized torus form (x, y) -> (x + (tau/2pi) sin(2pi(y+t)), y).
  double tau = 1.0;

  // StandardMap: f(x,y) = (L psi(x) - y + omega, x), psi(x) = sin(2pi x)/2pi,
  // omega uniform on [-eps, eps].
  double kick_strength = 10.0;
  double noise_halfwidth = 0.1;

  // LinearCocycle: explicit fiber matrices over a one-point base, or the
  // block-shear family.
  std::optional<BlockShearSpec> block_shear;

  // ProductLift
  std::shared_ptr<ModelConfig> base;
  int copies = 2;

  int max_dimension = 8;
};

/// One realized map: a table entry plus optional family phase and an
/// algebraic transform tag.
struct MapInstance {
  int map_id = 0;
  double phase = 0.0;
  bool has_phase = false;
  MapTransform transform = MapTransform::Identity;

  static MapInstance of(const Letter& l) {
    return MapInstance{l.map_id, l.phase, l.has_phase, l.transform};
  }
};

struct JacobianPair {
  Mat jac;         // D_x f
  Mat cojac;       // (D_x f)^{-T}, the adjoint-inverse action on covectors
  double det_jac;  // det D_x f
};

/// An immutable model handle: a table of maps with exact forward/inverse
/// evaluation and analytic first/second derivatives. Cheap to copy; all
/// evaluation is pure and thread-safe.
class Model {
 public:
  Model() = default;

  ModelVariant variant() const;
  int dimension() const;
  /// Number of table entries (families count as one entry).
  int map_count() const;
  /// True for fiber-only dynamics over a single formal base point.
  bool point_base() const;
  /// True when D_x f does not depend on x (affine and linear models).
  bool constant_jacobian() const;
  bool volume_preserving() const;
  bool supports(MapTransform t) const;
  bool parametric(int map_id) const;
  /// Period of the phase parameter for parametric entries.
  double phase_period(int map_id) const;

  TorusPoint apply(const MapInstance& f, const TorusPoint& x) const;
  JacobianPair jacobian_pair(const MapInstance& f, const TorusPoint& x) const;
  /// Second derivative tensor: H[i](j,k) = d^2 f_i / dx_j dx_k.
  std::vector<Mat> second_derivative(const MapInstance& f,
                                     const TorusPoint& x) const;

  TorusPoint apply_word(const Word& w, const TorusPoint& x) const;

  /// The measure the model was declared with (uniform atoms, the phase
  /// convolution, ...). Experiments may override it.
  const DrivingMeasure& default_measure() const;

  /// For affine/linear maps: the effective linear part under the instance's
  /// transform. Throws for genuinely nonlinear entries.
  Mat linear_part(const MapInstance& f) const;
  /// Affine translation part under the instance's transform (zero for
  /// point-base models).
  Vec translation_part(const MapInstance& f) const;

  bool galerkin_supported() const;

  std::uint64_t hash() const;
  const std::string& description() const;

  /// k-fold product: the same sampled map applied to every component.
  friend Model lift_product(const Model& base, int k);
  friend Model build_model(const ModelConfig& config);

  /// For ProductLift models: the base model and copy count.
  const Model* product_base() const;
  int product_copies() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

Model build_model(const ModelConfig& config);
Model lift_product(const Model& base, int k);

/// Convenience: the affine model x -> x + j/Q (componentwise, all Q^d
/// shifts, uniform weights) used as a non-ergodicity control.
ModelConfig rational_translation_config(int d, int Q);

}  // namespace rdsl
