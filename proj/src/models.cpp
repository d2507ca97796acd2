#include "rdsl/models.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace rdsl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt_mat(const Mat& m) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << m(i, j) << ",";
  os << "]";
  return os.str();
}

std::string fmt_vec(const Vec& v) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << v[i] << ",";
  os << "]";
  return os.str();
}

Mat round_to_integers(const Mat& a, const char* what) {
  Mat r(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = std::round(a(i, j));
      if (std::fabs(v - a(i, j)) > 1e-9) {
        std::ostringstream os;
        os << what << " must have integer entries, got " << a(i, j);
        throw ConfigError(os.str());
      }
      r(i, j) = v;
    }
  return r;
}

// Exact inverse of a unimodular integer matrix: the double inverse rounds
// to the true integer inverse, which we then verify.
Mat unimodular_inverse(const Mat& a) {
  const double det = a.determinant();
  if (std::fabs(std::fabs(det) - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "matrix is not unimodular (det = " << det << ")";
    throw ConfigError(os.str());
  }
  Mat inv = a.inverse();
  for (Eigen::Index i = 0; i < inv.rows(); ++i)
    for (Eigen::Index j = 0; j < inv.cols(); ++j)
      inv(i, j) = std::round(inv(i, j));
  if (((a * inv) - Mat::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff() >
      1e-9)
    throw ConfigError("failed to invert integer matrix exactly");
  return inv;
}

TorusPoint reduce_vec(Vec v) { return TorusPoint(std::move(v)); }

}  // namespace

const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::AffineTorus: return "affine-torus";
    case ModelVariant::Pierrehumbert: return "pierrehumbert";
    case ModelVariant::StandardMap: return "standard-map";
    case ModelVariant::LinearCocycle: return "linear-cocycle";
    case ModelVariant::ProductLift: return "product-lift";
  }
  return "?";
}

struct Model::Impl {
  ModelVariant variant = ModelVariant::AffineTorus;
  int dim = 2;
  bool point_base = false;
  bool constant_jac = false;
  bool volume_preserving = true;
  bool linear_maps = false;  // transpose transforms defined

  struct AffineDef {
    Mat A, Ainv;
    Vec b;
  };
  std::vector<AffineDef> affine;

  double tau = 1.0;      // pierrehumbert
  double kick = 10.0;    // standard map L
  double noise = 0.1;    // standard map eps

  struct FiberDef {
    Mat M, Minv;
  };
  std::vector<FiberDef> fiber;
  std::optional<BlockShearSpec> block;
  std::int64_t block_words = 0;  // base^power

  Model base;  // product lift
  int copies = 1;

  int map_count = 0;
  DrivingMeasure default_measure;
  std::string description;
  std::uint64_t hash = 0;

  FiberDef block_matrix(int id) const {
    const int m = int(block->base.size());
    FiberDef out;
    if (std::int64_t(id) == block_words) {
      // Constant shear [[I,0],[L*I,I]] and its exact inverse.
      Mat s = Mat::Identity(4, 4), si = Mat::Identity(4, 4);
      s(2, 0) = s(3, 1) = block->shear_strength;
      si(2, 0) = si(3, 1) = -block->shear_strength;
      out.M = s;
      out.Minv = si;
      return out;
    }
    // Word digits, step 0 first: W = B_{d_{p-1}} ... B_{d_0}.
    Mat w = Mat::Identity(2, 2);
    std::int64_t r = id;
    for (int step = 0; step < block->power; ++step) {
      w = block->base[std::size_t(r % m)] * w;
      r /= m;
    }
    // |det W| = 1, so the 2x2 inverse is exact integer arithmetic.
    const double det = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
    Mat wi(2, 2);
    wi << w(1, 1), -w(0, 1), -w(1, 0), w(0, 0);
    wi /= det;
    out.M = Mat::Identity(4, 4);
    out.M.topLeftCorner(2, 2) = w;
    out.Minv = Mat::Identity(4, 4);
    out.Minv.topLeftCorner(2, 2) = wi;
    return out;
  }

  // Effective (A, b) of an affine entry under a transform.
  std::pair<Mat, Vec> affine_effective(const MapInstance& f) const {
    const AffineDef& d = affine[std::size_t(f.map_id)];
    switch (f.transform) {
      case MapTransform::Identity: return {d.A, d.b};
      case MapTransform::Inverse: return {d.Ainv, Vec(-(d.Ainv * d.b))};
      case MapTransform::Transpose: return {d.A.transpose(), d.b};
      case MapTransform::InverseTranspose:
        return {d.Ainv.transpose(), Vec(-(d.Ainv.transpose() * d.b))};
    }
    return {d.A, d.b};
  }

  Mat fiber_effective(const MapInstance& f) const {
    FiberDef d =
        block ? block_matrix(f.map_id) : fiber[std::size_t(f.map_id)];
    switch (f.transform) {
      case MapTransform::Identity: return d.M;
      case MapTransform::Inverse: return d.Minv;
      case MapTransform::Transpose: return d.M.transpose();
      case MapTransform::InverseTranspose: return d.Minv.transpose();
    }
    return d.M;
  }

  Mat fiber_cojac(const MapInstance& f) const {
    FiberDef d =
        block ? block_matrix(f.map_id) : fiber[std::size_t(f.map_id)];
    // (M'^T)^{-1} for the effective matrix M' of each transform.
    switch (f.transform) {
      case MapTransform::Identity: return d.Minv.transpose();
      case MapTransform::Inverse: return d.M.transpose();
      case MapTransform::Transpose: return d.Minv;
      case MapTransform::InverseTranspose: return d.M;
    }
    return d.Minv.transpose();
  }
};

ModelVariant Model::variant() const { return impl_->variant; }
int Model::dimension() const { return impl_->dim; }
int Model::map_count() const { return impl_->map_count; }
bool Model::point_base() const { return impl_->point_base; }
bool Model::constant_jacobian() const { return impl_->constant_jac; }
bool Model::volume_preserving() const { return impl_->volume_preserving; }
const DrivingMeasure& Model::default_measure() const {
  return impl_->default_measure;
}
std::uint64_t Model::hash() const { return impl_->hash; }
const std::string& Model::description() const { return impl_->description; }

bool Model::supports(MapTransform t) const {
  if (t == MapTransform::Identity || t == MapTransform::Inverse) return true;
  return impl_->linear_maps;
}

bool Model::parametric(int map_id) const {
  switch (impl_->variant) {
    case ModelVariant::Pierrehumbert:
    case ModelVariant::StandardMap: return true;
    case ModelVariant::ProductLift: return impl_->base.parametric(map_id);
    default: return false;
  }
}

double Model::phase_period(int map_id) const {
  switch (impl_->variant) {
    case ModelVariant::Pierrehumbert: return 1.0;
    case ModelVariant::StandardMap: return 2.0 * impl_->noise;
    case ModelVariant::ProductLift: return impl_->base.phase_period(map_id);
    default: return 0.0;
  }
}

const Model* Model::product_base() const {
  return impl_->variant == ModelVariant::ProductLift ? &impl_->base : nullptr;
}
int Model::product_copies() const { return impl_->copies; }

bool Model::galerkin_supported() const {
  switch (impl_->variant) {
    case ModelVariant::AffineTorus:
    case ModelVariant::Pierrehumbert: return true;
    case ModelVariant::ProductLift: return impl_->base.galerkin_supported();
    default: return false;
  }
}

namespace {

void check_transform_supported(const Model& m, const MapInstance& f) {
  if (!m.supports(f.transform)) {
    std::ostringstream os;
    os << to_string(m.variant()) << " maps do not support the "
       << to_string(f.transform) << " transform";
    throw UnsupportedError(os.str());
  }
}

bool is_inverse_like(MapTransform t) {
  return t == MapTransform::Inverse || t == MapTransform::InverseTranspose;
}

}  // namespace

TorusPoint Model::apply(const MapInstance& f, const TorusPoint& x) const {
  const Impl& im = *impl_;
  check_transform_supported(*this, f);
  if (x.dimension() != im.dim) throw ConfigError("point dimension mismatch");
  switch (im.variant) {
    case ModelVariant::AffineTorus: {
      auto [A, b] = im.affine_effective(f);
      return reduce_vec(A * x.coords() + b);
    }
    case ModelVariant::Pierrehumbert: {
      const bool horizontal = f.map_id == 0;
      const bool inv = is_inverse_like(f.transform);
      Vec y = x.coords();
      const int shifted = horizontal ? 0 : 1;
      const int driver = horizontal ? 1 : 0;
      const double shift =
          im.tau / kTwoPi * std::sin(kTwoPi * (y[driver] + f.phase));
      y[shifted] += inv ? -shift : shift;
      return reduce_vec(std::move(y));
    }
    case ModelVariant::StandardMap: {
      const double omega = f.phase - im.noise;
      Vec y(2);
      if (!is_inverse_like(f.transform)) {
        // (x, y) -> (L psi(x) - y + omega, x)
        y[0] = im.kick * std::sin(kTwoPi * x.coords()[0]) / kTwoPi -
               x.coords()[1] + omega;
        y[1] = x.coords()[0];
      } else {
        y[0] = x.coords()[1];
        y[1] = im.kick * std::sin(kTwoPi * x.coords()[1]) / kTwoPi -
               x.coords()[0] + omega;
      }
      return reduce_vec(std::move(y));
    }
    case ModelVariant::LinearCocycle:
      return x;  // one-point base
    case ModelVariant::ProductLift: {
      const int db = im.base.dimension();
      Vec y(im.dim);
      for (int c = 0; c < im.copies; ++c) {
        const TorusPoint xc(x.coords().segment(c * db, db));
        y.segment(c * db, db) = im.base.apply(f, xc).coords();
      }
      return TorusPoint(std::move(y));
    }
  }
  throw std::logic_error("unreachable");
}

JacobianPair Model::jacobian_pair(const MapInstance& f,
                                  const TorusPoint& x) const {
  const Impl& im = *impl_;
  check_transform_supported(*this, f);
  JacobianPair out;
  switch (im.variant) {
    case ModelVariant::AffineTorus: {
      const Impl::AffineDef& d = im.affine[std::size_t(f.map_id)];
      // All four transforms have exact jac/cojac in terms of A and A^{-1}.
      switch (f.transform) {
        case MapTransform::Identity:
          out.jac = d.A;
          out.cojac = d.Ainv.transpose();
          break;
        case MapTransform::Inverse:
          out.jac = d.Ainv;
          out.cojac = d.A.transpose();
          break;
        case MapTransform::Transpose:
          out.jac = d.A.transpose();
          out.cojac = d.Ainv;
          break;
        case MapTransform::InverseTranspose:
          out.jac = d.Ainv.transpose();
          out.cojac = d.A;
          break;
      }
      break;
    }
    case ModelVariant::Pierrehumbert: {
      const bool horizontal = f.map_id == 0;
      const bool inv = is_inverse_like(f.transform);
      const int driver = horizontal ? 1 : 0;
      double c = im.tau * std::cos(kTwoPi * (x.coords()[driver] + f.phase));
      if (inv) c = -c;
      out.jac = Mat::Identity(2, 2);
      out.cojac = Mat::Identity(2, 2);
      if (horizontal) {
        out.jac(0, 1) = c;
        out.cojac(1, 0) = -c;
      } else {
        out.jac(1, 0) = c;
        out.cojac(0, 1) = -c;
      }
      break;
    }
    case ModelVariant::StandardMap: {
      const bool inv = is_inverse_like(f.transform);
      out.jac = Mat(2, 2);
      if (!inv) {
        const double lp = im.kick * std::cos(kTwoPi * x.coords()[0]);
        out.jac << lp, -1.0, 1.0, 0.0;
      } else {
        const double lp = im.kick * std::cos(kTwoPi * x.coords()[1]);
        out.jac << 0.0, 1.0, -1.0, lp;
      }
      // det = 1 exactly for the kick form; closed-form inverse transpose.
      out.cojac = Mat(2, 2);
      out.cojac << out.jac(1, 1), -out.jac(1, 0), -out.jac(0, 1), out.jac(0, 0);
      break;
    }
    case ModelVariant::LinearCocycle: {
      out.jac = im.fiber_effective(f);
      out.cojac = im.fiber_cojac(f);
      break;
    }
    case ModelVariant::ProductLift: {
      const int db = im.base.dimension();
      out.jac = Mat::Zero(im.dim, im.dim);
      out.cojac = Mat::Zero(im.dim, im.dim);
      double det = 1.0;
      for (int c = 0; c < im.copies; ++c) {
        const TorusPoint xc(x.coords().segment(c * db, db));
        JacobianPair jp = im.base.jacobian_pair(f, xc);
        out.jac.block(c * db, c * db, db, db) = jp.jac;
        out.cojac.block(c * db, c * db, db, db) = jp.cojac;
        det *= jp.det_jac;
      }
      out.det_jac = det;
      return out;
    }
  }
  out.det_jac = out.jac.determinant();
  if (std::fabs(out.det_jac) < 1e-8)
    throw std::runtime_error("singular jacobian encountered");
  return out;
}

std::vector<Mat> Model::second_derivative(const MapInstance& f,
                                          const TorusPoint& x) const {
  const Impl& im = *impl_;
  check_transform_supported(*this, f);
  std::vector<Mat> h(static_cast<std::size_t>(im.dim), Mat::Zero(im.dim, im.dim));
  switch (im.variant) {
    case ModelVariant::AffineTorus:
    case ModelVariant::LinearCocycle: break;
    case ModelVariant::Pierrehumbert: {
      const bool horizontal = f.map_id == 0;
      const bool inv = is_inverse_like(f.transform);
      const int shifted = horizontal ? 0 : 1;
      const int driver = horizontal ? 1 : 0;
      double s =
          -kTwoPi * im.tau * std::sin(kTwoPi * (x.coords()[driver] + f.phase));
      if (inv) s = -s;
      h[std::size_t(shifted)](driver, driver) = s;
      break;
    }
    case ModelVariant::StandardMap: {
      const bool inv = is_inverse_like(f.transform);
      if (!inv) {
        h[0](0, 0) = -kTwoPi * im.kick * std::sin(kTwoPi * x.coords()[0]);
      } else {
        h[1](1, 1) = -kTwoPi * im.kick * std::sin(kTwoPi * x.coords()[1]);
      }
      break;
    }
    case ModelVariant::ProductLift: {
      const int db = im.base.dimension();
      for (int c = 0; c < im.copies; ++c) {
        const TorusPoint xc(x.coords().segment(c * db, db));
        auto hb = im.base.second_derivative(f, xc);
        for (int i = 0; i < db; ++i)
          h[std::size_t(c * db + i)].block(c * db, c * db, db, db) = hb[std::size_t(i)];
      }
      break;
    }
  }
  return h;
}

TorusPoint Model::apply_word(const Word& w, const TorusPoint& x) const {
  TorusPoint y = x;
  for (const auto& l : w.letters) y = apply(MapInstance::of(l), y);
  return y;
}

Mat Model::linear_part(const MapInstance& f) const {
  const Impl& im = *impl_;
  switch (im.variant) {
    case ModelVariant::AffineTorus: return im.affine_effective(f).first;
    case ModelVariant::LinearCocycle: return im.fiber_effective(f);
    case ModelVariant::ProductLift: {
      const Mat base = im.base.linear_part(f);
      const int db = im.base.dimension();
      Mat out = Mat::Zero(im.dim, im.dim);
      for (int c = 0; c < im.copies; ++c)
        out.block(c * db, c * db, db, db) = base;
      return out;
    }
    default:
      throw UnsupportedError("model has no global linear part");
  }
}

Vec Model::translation_part(const MapInstance& f) const {
  const Impl& im = *impl_;
  switch (im.variant) {
    case ModelVariant::AffineTorus: return im.affine_effective(f).second;
    case ModelVariant::LinearCocycle: return Vec::Zero(im.dim);
    case ModelVariant::ProductLift: {
      const Vec base = im.base.translation_part(f);
      const int db = im.base.dimension();
      Vec out(im.dim);
      for (int c = 0; c < im.copies; ++c) out.segment(c * db, db) = base;
      return out;
    }
    default:
      throw UnsupportedError("model has no global linear part");
  }
}

Model build_model(const ModelConfig& config) {
  auto impl = std::make_shared<Model::Impl>();
  Model::Impl& im = *impl;
  im.variant = config.variant;
  std::ostringstream desc;

  switch (config.variant) {
    case ModelVariant::AffineTorus: {
      if (config.matrices.empty())
        throw ConfigError("affine-torus model needs at least one matrix");
      im.dim = int(config.matrices.front().rows());
      im.constant_jac = true;
      im.linear_maps = true;
      desc << "affine-torus d=" << im.dim;
      for (std::size_t j = 0; j < config.matrices.size(); ++j) {
        Model::Impl::AffineDef d;
        if (config.matrices[j].rows() != im.dim ||
            config.matrices[j].cols() != im.dim)
          throw ConfigError("affine matrices must share one dimension");
        d.A = round_to_integers(config.matrices[j], "affine-torus matrix");
        d.Ainv = unimodular_inverse(d.A);
        d.b = j < config.offsets.size() ? config.offsets[j] : Vec::Zero(im.dim);
        if (d.b.size() != im.dim)
          throw ConfigError("offset dimension mismatch");
        desc << " A" << j << "=" << fmt_mat(d.A) << " b" << j << "="
             << fmt_vec(d.b);
        im.affine.push_back(std::move(d));
      }
      im.map_count = int(im.affine.size());
      im.volume_preserving = true;
      std::vector<MapAtom> atoms;
      for (int j = 0; j < im.map_count; ++j) {
        const double w = config.weights.empty()
                             ? 1.0 / im.map_count
                             : config.weights[std::size_t(j)];
        atoms.push_back(MapAtom{j, w, std::nullopt});
      }
      im.default_measure = DrivingMeasure::finite(std::move(atoms));
      break;
    }
    case ModelVariant::Pierrehumbert: {
      if (!(config.tau > 0.0))
        throw ConfigError("pierrehumbert shear amplitude must be positive");
      im.dim = 2;
      im.tau = config.tau;
      im.map_count = 2;  // horizontal, vertical
      im.volume_preserving = true;
      desc << "pierrehumbert tau=" << config.tau;
      // One step is the convolution of the two uniform-phase shears,
      // horizontal sample applied first.
      im.default_measure = DrivingMeasure::convolution(
          {DrivingMeasure::uniform_phase(0, 1.0),
           DrivingMeasure::uniform_phase(1, 1.0)});
      break;
    }
    case ModelVariant::StandardMap: {
      if (!(config.kick_strength > 0.0))
        throw ConfigError("standard-map kick strength must be positive");
      if (!(config.noise_halfwidth > 0.0) || config.noise_halfwidth > 1.0)
        throw ConfigError("standard-map noise half-width must be in (0,1]");
      im.dim = 2;
      im.kick = config.kick_strength;
      im.noise = config.noise_halfwidth;
      im.map_count = 1;
      im.volume_preserving = true;
      desc << "standard-map L=" << config.kick_strength
           << " eps=" << config.noise_halfwidth;
      im.default_measure =
          DrivingMeasure::uniform_phase(0, 2.0 * config.noise_halfwidth);
      break;
    }
    case ModelVariant::LinearCocycle: {
      im.point_base = true;
      im.constant_jac = true;
      im.linear_maps = true;
      if (config.block_shear) {
        const auto& bs = *config.block_shear;
        if (bs.base.empty() || bs.power < 1 || !(bs.shear_strength > 0.0))
          throw ConfigError("block-shear family needs base matrices, a "
                            "positive power, and positive shear strength");
        im.dim = 4;
        im.block = bs;
        for (auto& b : im.block->base) {
          b = round_to_integers(b, "block-shear base matrix");
          unimodular_inverse(b);  // validates |det| = 1
          if (b.rows() != 2 || b.cols() != 2)
            throw ConfigError("block-shear base matrices must be 2x2");
        }
        im.block_words = 1;
        for (int i = 0; i < bs.power; ++i) {
          im.block_words *= std::int64_t(bs.base.size());
          if (im.block_words > (std::int64_t(1) << 26))
            throw ConfigError("block-shear word table too large");
        }
        im.map_count = int(im.block_words + 1);
        im.volume_preserving = true;
        desc << "linear-cocycle block-shear power=" << bs.power
             << " L=" << bs.shear_strength;
        for (std::size_t j = 0; j < bs.base.size(); ++j)
          desc << " B" << j << "=" << fmt_mat(im.block->base[j]);
        std::vector<MapAtom> atoms;
        const double w = 0.5 / double(im.block_words);
        for (int j = 0; j < int(im.block_words); ++j)
          atoms.push_back(MapAtom{j, w, std::nullopt});
        atoms.push_back(MapAtom{int(im.block_words), 0.5, std::nullopt});
        im.default_measure = DrivingMeasure::finite(std::move(atoms));
      } else {
        if (config.matrices.empty())
          throw ConfigError("linear-cocycle model needs matrices");
        im.dim = int(config.matrices.front().rows());
        desc << "linear-cocycle d=" << im.dim;
        im.volume_preserving = true;
        for (std::size_t j = 0; j < config.matrices.size(); ++j) {
          const Mat& M = config.matrices[j];
          if (M.rows() != im.dim || M.cols() != im.dim)
            throw ConfigError("cocycle matrices must share one dimension");
          Model::Impl::FiberDef d;
          d.M = M;
          d.Minv = M.inverse();
          if (std::fabs(std::fabs(M.determinant()) - 1.0) > 1e-10)
            im.volume_preserving = false;
          desc << " M" << j << "=" << fmt_mat(M);
          im.fiber.push_back(std::move(d));
        }
        im.map_count = int(im.fiber.size());
        std::vector<MapAtom> atoms;
        for (int j = 0; j < im.map_count; ++j) {
          const double w = config.weights.empty()
                               ? 1.0 / im.map_count
                               : config.weights[std::size_t(j)];
          atoms.push_back(MapAtom{j, w, std::nullopt});
        }
        im.default_measure = DrivingMeasure::finite(std::move(atoms));
      }
      break;
    }
    case ModelVariant::ProductLift: {
      if (!config.base)
        throw ConfigError("product-lift model needs a base model");
      if (config.copies < 2) throw ConfigError("product-lift needs k >= 2");
      Model base = build_model(*config.base);
      if (base.dimension() * config.copies > config.max_dimension) {
        std::ostringstream os;
        os << "product dimension " << base.dimension() * config.copies
           << " exceeds the configured maximum " << config.max_dimension;
        throw ConfigError(os.str());
      }
      return lift_product(base, config.copies);
    }
  }

  im.description = desc.str();
  im.hash = fnv1a(im.description);
  Model model;
  model.impl_ = std::move(impl);
  return model;
}

Model lift_product(const Model& base, int k) {
  if (k < 2) throw ConfigError("product-lift needs k >= 2");
  if (base.dimension() * k > 8) {
    std::ostringstream os;
    os << "product dimension " << base.dimension() * k
       << " exceeds the configured maximum 8";
    throw ConfigError(os.str());
  }
  if (base.point_base())
    throw UnsupportedError("product lift is defined for torus models");
  auto impl = std::make_shared<Model::Impl>();
  Model::Impl& im = *impl;
  im.variant = ModelVariant::ProductLift;
  im.base = base;
  im.copies = k;
  im.dim = base.dimension() * k;
  im.constant_jac = base.constant_jacobian();
  im.volume_preserving = base.volume_preserving();
  im.linear_maps = base.supports(MapTransform::Transpose);
  im.map_count = base.map_count();
  im.default_measure = base.default_measure();
  std::ostringstream desc;
  desc << "product-lift k=" << k << " of {" << base.description() << "}";
  im.description = desc.str();
  im.hash = fnv1a(im.description);
  Model model;
  model.impl_ = std::move(impl);
  return model;
}

ModelConfig rational_translation_config(int d, int Q) {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  cfg.dimension = d;
  std::int64_t count = 1;
  for (int i = 0; i < d; ++i) count *= Q;
  for (std::int64_t idx = 0; idx < count; ++idx) {
    cfg.matrices.push_back(Mat::Identity(d, d));
    Vec b(d);
    std::int64_t r = idx;
    for (int i = 0; i < d; ++i) {
      b[i] = double(r % Q) / double(Q);
      r /= Q;
    }
    cfg.offsets.push_back(b);
    cfg.weights.push_back(1.0 / double(count));
  }
  return cfg;
}

}  // namespace rdsl
