#include "rdsl/spectral.hpp"

#include "rdsl/bessel.hpp"
#include "rdsl/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace rdsl {

CVec dense_eigenvalues(CMat a);  // eig.cpp

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// e^{2 pi i theta} with the integer part removed first, so rational phases
// that should be exactly 1 come out exactly 1.
Complex phase_unit(double theta) {
  const double frac = theta - std::round(theta);
  if (frac == 0.0) return Complex(1.0, 0.0);
  return std::polar(1.0, kTwoPi * frac);
}

bool affine_like(const Model& model) {
  if (model.variant() == ModelVariant::AffineTorus) return true;
  if (model.variant() == ModelVariant::ProductLift)
    return model.product_base()->variant() == ModelVariant::AffineTorus;
  return false;
}

// One composed draw of an affine measure: x -> A x + b with weight w.
struct AffineDraw {
  Mat A;
  Vec b;
  double w;
};

std::vector<AffineDraw> affine_draw_support(const Model& model,
                                            const DrivingMeasure& mu,
                                            std::int64_t cap) {
  const auto words = enumerate_words(mu, 1, cap);
  std::vector<AffineDraw> draws;
  draws.reserve(words.size());
  const int d = model.dimension();
  for (const auto& w : words) {
    AffineDraw dr;
    dr.A = Mat::Identity(d, d);
    dr.b = Vec::Zero(d);
    for (const auto& l : w.letters) {
      const MapInstance f = MapInstance::of(l);
      const Mat A = model.linear_part(f);
      dr.b = A * dr.b + model.translation_part(f);
      dr.A = A * dr.A;
    }
    dr.w = w.weight;
    draws.push_back(std::move(dr));
  }
  return draws;
}

using Triplets = std::vector<Eigen::Triplet<Complex>>;

struct FactorMatrix {
  Eigen::SparseMatrix<Complex> mat;
  Vec loss;
};

FactorMatrix affine_factor(const Model& model, const DrivingMeasure& mu,
                           const ModeBox& box) {
  const auto draws = affine_draw_support(model, mu, 100000);
  const int d = box.d;
  Triplets trip;
  Vec loss = Vec::Zero(box.size());
  Mode target(static_cast<std::size_t>(d));
  for (std::int64_t col = 0; col < box.size(); ++col) {
    const Mode k = box.mode_of(col);
    for (const auto& dr : draws) {
      // Column k picks up weight * e^{2 pi i <k,b>} at row A^T k.
      double theta = 0.0;
      for (int i = 0; i < d; ++i) theta += double(k[std::size_t(i)]) * dr.b[i];
      for (int i = 0; i < d; ++i) {
        std::int64_t t = 0;
        for (int j = 0; j < d; ++j)
          t += std::llround(dr.A(j, i)) * k[std::size_t(j)];
        target[std::size_t(i)] = t;
      }
      if (box.contains(target)) {
        trip.emplace_back(int(box.index_of(target)), int(col),
                          dr.w * phase_unit(theta));
      } else {
        loss[col] += dr.w;
      }
    }
  }
  FactorMatrix out;
  out.mat.resize(box.size(), box.size());
  out.mat.setFromTriplets(trip.begin(), trip.end());
  out.loss = std::move(loss);
  return out;
}

// Columns of the composition operator of one sinusoidal shear family over a
// leaf measure (uniform phase or a finite phase set). `family` 0 shears the
// first coordinate as a function of the second, 1 the reverse.
FactorMatrix shear_factor(double tau, int family, const DrivingMeasure& leaf,
                          const ModeBox& box) {
  const bool inverse_like = leaf.transform == MapTransform::Inverse ||
                            leaf.transform == MapTransform::InverseTranspose;
  if (leaf.transform == MapTransform::Transpose ||
      leaf.transform == MapTransform::InverseTranspose)
    throw UnsupportedError("shear maps have no transpose transform");

  const int drive = family == 0 ? 0 : 1;  // frequency entering the Bessel arg
  const int moved = family == 0 ? 1 : 0;  // coordinate whose frequency shifts

  FactorMatrix out;
  out.loss = Vec::Zero(box.size());
  Triplets trip;

  if (leaf.kind == MeasureKind::ParametricUniformPhase) {
    // Full phase average kills every nonzero harmonic: exact diagonal.
    for (std::int64_t col = 0; col < box.size(); ++col) {
      const Mode k = box.mode_of(col);
      const double z =
          (inverse_like ? -1.0 : 1.0) * double(k[std::size_t(drive)]) * tau;
      trip.emplace_back(int(col), int(col), Complex(bessel_j(0, z), 0.0));
    }
  } else if (leaf.kind == MeasureKind::FiniteAtoms) {
    const int m_max = int(std::ceil(box.K * tau)) + 50;
    // Harmonic weights of the phase set.
    std::vector<Complex> ps(static_cast<std::size_t>(2 * m_max + 1));
    for (int m = -m_max; m <= m_max; ++m) {
      Complex acc = 0.0;
      for (const auto& a : leaf.atoms)
        acc += a.weight * phase_unit(double(m) * a.phase.value_or(0.0));
      ps[std::size_t(m + m_max)] = acc;
    }
    Mode target;
    for (std::int64_t col = 0; col < box.size(); ++col) {
      const Mode k = box.mode_of(col);
      const double z =
          (inverse_like ? -1.0 : 1.0) * double(k[std::size_t(drive)]) * tau;
      for (int m = -m_max; m <= m_max; ++m) {
        const Complex coef = bessel_j(m, z) * ps[std::size_t(m + m_max)];
        if (std::abs(coef) < 1e-18) continue;
        target = k;
        target[std::size_t(moved)] += m;
        if (box.contains(target))
          trip.emplace_back(int(box.index_of(target)), int(col), coef);
        else
          out.loss[col] += std::abs(coef);
      }
    }
  } else {
    throw UnsupportedError("unsupported shear factor measure");
  }

  out.mat.resize(box.size(), box.size());
  out.mat.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// Two-point lift of a shear family with one shared uniform phase. The phase
// average couples the copies: only opposite harmonics survive.
FactorMatrix shear_factor_pair(double tau, int family,
                               const DrivingMeasure& leaf, const ModeBox& box) {
  if (leaf.kind != MeasureKind::ParametricUniformPhase)
    throw UnsupportedError(
        "2-point shear operators need uniform-phase factors");
  const bool inverse_like = leaf.transform == MapTransform::Inverse ||
                            leaf.transform == MapTransform::InverseTranspose;
  if (leaf.transform == MapTransform::Transpose ||
      leaf.transform == MapTransform::InverseTranspose)
    throw UnsupportedError("shear maps have no transpose transform");

  const int drive = family == 0 ? 0 : 1;
  const int moved = family == 0 ? 1 : 0;
  const double sgn = inverse_like ? -1.0 : 1.0;

  FactorMatrix out;
  out.loss = Vec::Zero(box.size());
  Triplets trip;
  const int m_max = int(std::ceil(box.K * tau)) + 50;
  Mode target;
  for (std::int64_t col = 0; col < box.size(); ++col) {
    const Mode k = box.mode_of(col);
    const double za = sgn * double(k[std::size_t(drive)]) * tau;
    const double zb = sgn * double(k[std::size_t(2 + drive)]) * tau;
    for (int m = -m_max; m <= m_max; ++m) {
      const double coef = bessel_j(m, za) * bessel_j(-m, zb);
      if (std::fabs(coef) < 1e-18) continue;
      target = k;
      target[std::size_t(moved)] += m;
      target[std::size_t(2 + moved)] -= m;
      if (box.contains(target))
        trip.emplace_back(int(box.index_of(target)), int(col),
                          Complex(coef, 0.0));
      else
        out.loss[col] += std::fabs(coef);
    }
  }
  out.mat.resize(box.size(), box.size());
  out.mat.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// Flatten a measure into its convolution factor leaves, in application
// order (factor 0 first).
void collect_leaves(const DrivingMeasure& mu,
                    std::vector<const DrivingMeasure*>& out) {
  if (mu.kind == MeasureKind::Convolution) {
    for (const auto& f : mu.factors) collect_leaves(f, out);
  } else {
    out.push_back(&mu);
  }
}

// Product of factor matrices in application order: the first-applied map is
// the leftmost matrix acting on mode coefficients. Truncation losses chain
// through the absolute values of the already-composed tail.
FactorMatrix compose_factors(std::vector<FactorMatrix> factors) {
  FactorMatrix total = std::move(factors.back());
  for (std::size_t fi = factors.size() - 1; fi-- > 0;) {
    const FactorMatrix& left = factors[fi];
    Vec loss = total.loss;
    for (int col = 0; col < total.mat.outerSize(); ++col) {
      double extra = 0.0;
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(total.mat, col); it;
           ++it)
        extra += std::abs(it.value()) * left.loss[it.row()];
      loss[col] += extra;
    }
    total.mat = (left.mat * total.mat).pruned(1e-300);
    total.loss = std::move(loss);
  }
  return total;
}

}  // namespace

CVec FourierOperator::apply(const CVec& c) const {
  if (diagonal) return diag.cwiseProduct(c);
  return mat * c;
}

CMat FourierOperator::dense() const {
  if (diagonal) {
    CMat m = CMat::Zero(dim(), dim());
    m.diagonal() = diag;
    return m;
  }
  return CMat(mat);
}

CMat FourierOperator::dense_weighted(double s) const {
  CMat m = dense();
  for (std::int64_t i = 0; i < dim(); ++i) {
    const double wi = weight(i, s);
    for (std::int64_t j = 0; j < dim(); ++j) m(i, j) *= wi / weight(j, s);
  }
  return m;
}

DrivingMeasure pierrehumbert_discrete_phases(int Q) {
  if (Q < 1) throw ConfigError("phase count must be positive");
  std::vector<MapAtom> h, v;
  for (int j = 0; j < Q; ++j) {
    h.push_back(MapAtom{0, 1.0 / Q, double(j) / Q});
    v.push_back(MapAtom{1, 1.0 / Q, double(j) / Q});
  }
  return DrivingMeasure::convolution(
      {DrivingMeasure::finite(std::move(h)), DrivingMeasure::finite(std::move(v))});
}

FourierOperator build_galerkin(const Model& model, const DrivingMeasure& mu,
                               int K, double s) {
  if (K < 1) throw ConfigError("box radius K must be >= 1");
  FourierOperator op;
  op.box = ModeBox{model.dimension(), K};
  op.s_default = s;
  op.model_hash = model.hash();
  if (op.box.size() > 200000)
    throw BudgetError("mode box too large: " + std::to_string(op.box.size()));

  FactorMatrix assembled;
  if (affine_like(model)) {
    assembled = affine_factor(model, mu, op.box);
  } else if (model.variant() == ModelVariant::Pierrehumbert) {
    const Model* base = &model;
    std::vector<const DrivingMeasure*> leaves;
    collect_leaves(mu, leaves);
    std::vector<FactorMatrix> factors;
    for (const auto* leaf : leaves) {
      int family;
      if (leaf->kind == MeasureKind::ParametricUniformPhase) {
        family = leaf->family_map_id;
      } else if (leaf->kind == MeasureKind::FiniteAtoms) {
        family = leaf->atoms.front().map_id;
        for (const auto& a : leaf->atoms)
          if (a.map_id != family || !a.phase)
            throw UnsupportedError(
                "shear factor atoms must share one family and carry phases");
      } else {
        throw UnsupportedError("unsupported shear factor");
      }
      if (family < 0 || family >= base->map_count())
        throw ConfigError("factor references an unknown map family");
      factors.push_back(shear_factor(/*tau=*/[&] {
        // Reconstruct tau through the Jacobian at a reference point: the
        // off-diagonal of the horizontal shear at phase 0, y = 0 is tau.
        const MapInstance f{0, 0.0, true, MapTransform::Identity};
        return base->jacobian_pair(f, TorusPoint::zero(2)).jac(0, 1);
      }(), family, *leaf, op.box));
    }
    assembled = compose_factors(std::move(factors));
  } else if (model.variant() == ModelVariant::ProductLift &&
             model.product_base()->variant() == ModelVariant::Pierrehumbert) {
    if (model.product_copies() != 2)
      throw UnsupportedError("shear product operators support k = 2 only");
    const Model& base = *model.product_base();
    const MapInstance f{0, 0.0, true, MapTransform::Identity};
    const double tau = base.jacobian_pair(f, TorusPoint::zero(2)).jac(0, 1);
    std::vector<const DrivingMeasure*> leaves;
    collect_leaves(mu, leaves);
    std::vector<FactorMatrix> factors;
    for (const auto* leaf : leaves) {
      if (leaf->kind != MeasureKind::ParametricUniformPhase)
        throw UnsupportedError(
            "2-point shear operators need uniform-phase factors");
      factors.push_back(
          shear_factor_pair(tau, leaf->family_map_id, *leaf, op.box));
    }
    assembled = compose_factors(std::move(factors));
  } else {
    throw UnsupportedError(
        "operator assembly supports affine models, alternating shears, and "
        "their products");
  }

  op.mat = std::move(assembled.mat);
  op.truncation_loss = std::move(assembled.loss);

  // Detect a purely diagonal operator (exact phase averages, translations).
  bool diagonal = true;
  for (int col = 0; col < op.mat.outerSize() && diagonal; ++col)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(op.mat, col); it; ++it)
      if (it.row() != col && std::abs(it.value()) > 0.0) {
        diagonal = false;
        break;
      }
  if (diagonal) {
    op.diagonal = true;
    op.diag = CVec::Zero(op.dim());
    for (int col = 0; col < op.mat.outerSize(); ++col)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(op.mat, col); it;
           ++it)
        if (it.row() == col) op.diag[col] = it.value();
  }
  return op;
}

namespace {

struct DeflatedMatrix {
  Eigen::SparseMatrix<Complex> mat;  // constant mode removed
  std::vector<std::int64_t> fixed;   // indices (original) of exact basis columns
};

DeflatedMatrix deflate(const FourierOperator& op) {
  const std::int64_t n = op.dim();
  const std::int64_t z = op.box.zero_index();
  DeflatedMatrix out;

  // Exactly invariant basis columns (column k equals e_k).
  std::vector<double> col_dev(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> has_diag(static_cast<std::size_t>(n), false);
  if (op.diagonal) {
    for (std::int64_t i = 0; i < n; ++i) {
      col_dev[std::size_t(i)] = std::abs(op.diag[i] - Complex(1.0, 0.0));
      has_diag[std::size_t(i)] = true;
    }
  } else {
    for (int col = 0; col < op.mat.outerSize(); ++col)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(op.mat, col); it;
           ++it) {
        if (it.row() == col) {
          col_dev[std::size_t(col)] += std::abs(it.value() - Complex(1.0, 0.0));
          has_diag[std::size_t(col)] = true;
        } else {
          col_dev[std::size_t(col)] += std::abs(it.value());
        }
      }
  }
  for (std::int64_t i = 0; i < n; ++i)
    if (has_diag[std::size_t(i)] && col_dev[std::size_t(i)] <= 1e-12)
      out.fixed.push_back(i);

  // Strip the constant mode's row and column.
  Triplets trip;
  if (op.diagonal) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (i == z) continue;
      const std::int64_t r = i > z ? i - 1 : i;
      trip.emplace_back(int(r), int(r), op.diag[i]);
    }
  } else {
    for (int col = 0; col < op.mat.outerSize(); ++col) {
      if (col == z) continue;
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(op.mat, col); it;
           ++it) {
        if (it.row() == z) continue;
        const std::int64_t r = it.row() > z ? it.row() - 1 : it.row();
        const std::int64_t c = col > z ? col - 1 : col;
        trip.emplace_back(int(r), int(c), it.value());
      }
    }
  }
  out.mat.resize(n - 1, n - 1);
  out.mat.setFromTriplets(trip.begin(), trip.end());
  return out;
}

std::vector<Complex> ritz_values(const Eigen::SparseMatrix<Complex>& b,
                                 const std::vector<std::int64_t>& seed_columns,
                                 int block, int iters) {
  const std::int64_t n = b.rows();
  block = int(std::min<std::int64_t>(block, n));
  CMat y = CMat::Zero(n, block);
  int col = 0;
  for (std::int64_t idx : seed_columns) {
    if (col >= block) break;
    y(idx, col++) = 1.0;
  }
  RngStream rng(0x5EEDBA5EULL, 17);
  for (; col < block; ++col)
    for (std::int64_t i = 0; i < n; ++i)
      y(i, col) = Complex(rng.next_gaussian(), rng.next_gaussian());

  const auto orthonormalize = [&]() {
    Eigen::HouseholderQR<CMat> qr(y);
    y = qr.householderQ() * CMat::Identity(n, block);
  };
  orthonormalize();
  for (int it = 0; it < iters; ++it) {
    y = b * y;
    if (it % 4 == 3 || it == iters - 1) orthonormalize();
  }
  const CMat h = y.adjoint() * (b * y);
  const CVec vals = dense_eigenvalues(h);
  return std::vector<Complex>(vals.data(), vals.data() + vals.size());
}

}  // namespace

SpectralReport operator_spectrum(const FourierOperator& op, double s,
                                 const SpectrumOptions& opts) {
  if (s < -1.0 || s > 1.0)
    throw ConfigError("weighted spectra limited to s in [-1, 1]");
  SpectralReport rep;
  const std::int64_t n = op.dim();
  const std::int64_t z = op.box.zero_index();

  // Column of the zero mode must be exactly its own indicator.
  {
    CVec e0 = CVec::Zero(n);
    e0[z] = 1.0;
    const CVec g0 = op.apply(e0);
    if ((g0 - e0).cwiseAbs().maxCoeff() > 1e-12)
      throw std::runtime_error("operator does not fix the constant mode");
  }

  const DeflatedMatrix defl = deflate(op);
  rep.fixed_mode_count = int(defl.fixed.size());

  std::vector<Complex> b_eigs;
  if (op.diagonal) {
    b_eigs.reserve(std::size_t(n - 1));
    for (std::int64_t i = 0; i < n; ++i)
      if (i != z) b_eigs.push_back(op.diag[i]);
    rep.full_spectrum = true;
    rep.diagnostic = "diagonal operator; spectrum read off the diagonal";
  } else if (n - 1 <= opts.dense_limit) {
    // Eigenvalues are similarity-invariant, so the unweighted matrix and the
    // weighted one share them; s only matters for norms.
    const CVec vals = dense_eigenvalues(CMat(defl.mat));
    b_eigs.assign(vals.data(), vals.data() + vals.size());
    rep.full_spectrum = true;
    rep.diagnostic = "dense solve of the constant-deflated matrix";
  } else {
    std::vector<std::int64_t> seeds;
    for (std::int64_t idx : defl.fixed) {
      if (idx == z) continue;
      seeds.push_back(idx > z ? idx - 1 : idx);
    }
    b_eigs = ritz_values(defl.mat, seeds, opts.block, opts.iters);
    rep.full_spectrum = false;
    std::ostringstream os;
    os << "peripheral Ritz values (subspace iteration, block="
       << std::min<std::int64_t>(opts.block, n - 1) << ", iters=" << opts.iters
       << ")";
    rep.diagnostic = os.str();
  }

  std::sort(b_eigs.begin(), b_eigs.end(), [](const Complex& a, const Complex& b2) {
    return std::abs(a) > std::abs(b2);
  });
  rep.eigenvalues.push_back(Complex(1.0, 0.0));
  rep.eigenvalues.insert(rep.eigenvalues.end(), b_eigs.begin(), b_eigs.end());
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(),
            [](const Complex& a, const Complex& b2) {
              return std::abs(a) > std::abs(b2);
            });

  if (!b_eigs.empty()) {
    rep.subleading = b_eigs.front();
    rep.subleading_modulus = std::abs(b_eigs.front());
  }
  rep.unit_multiplicity = 0;
  for (const auto& l : rep.eigenvalues)
    if (std::abs(l) >= 1.0 - 1e-8) ++rep.unit_multiplicity;
  rep.weak_mixing_pass = true;
  for (const auto& l : b_eigs)
    if (std::abs(l) >= 1.0 - 1e-6) {
      rep.weak_mixing_pass = false;
      break;
    }
  return rep;
}

double operator_norm_estimate(const FourierOperator& op, double s, int iters) {
  const std::int64_t n = op.dim();
  const auto apply_weighted = [&](const CVec& v) {
    CVec u(n);
    for (std::int64_t i = 0; i < n; ++i) u[i] = v[i] / op.weight(i, s);
    CVec w = op.apply(u);
    for (std::int64_t i = 0; i < n; ++i) w[i] *= op.weight(i, s);
    return w;
  };
  const auto apply_weighted_adj = [&](const CVec& v) {
    CVec u(n);
    for (std::int64_t i = 0; i < n; ++i) u[i] = v[i] * op.weight(i, s);
    CVec w = op.diagonal ? CVec(op.diag.conjugate().cwiseProduct(u))
                         : CVec(op.mat.adjoint() * u);
    for (std::int64_t i = 0; i < n; ++i) w[i] /= op.weight(i, s);
    return w;
  };

  RngStream rng(0xA11CE5ULL, 3);
  CVec v(n);
  for (std::int64_t i = 0; i < n; ++i)
    v[i] = Complex(rng.next_gaussian(), rng.next_gaussian());
  v /= v.norm();
  double sigma2 = 0.0;
  for (int it = 0; it < iters; ++it) {
    CVec w = apply_weighted_adj(apply_weighted(v));
    sigma2 = w.norm();
    if (sigma2 < 1e-300) return 0.0;
    v = w / sigma2;
  }
  return std::sqrt(sigma2);
}

// ---------------------------------------------------------------------------
// Exact mode-wave propagation on the full integer lattice (affine models).

namespace {

using Mode4 = std::array<std::int64_t, 4>;

struct Mode4Hash {
  std::size_t operator()(const Mode4& m) const {
    return std::size_t(fnv1a(m.data(), sizeof(m)));
  }
};

using ModeWave = std::unordered_map<Mode4, Complex, Mode4Hash>;

struct IntDraw {
  std::array<std::array<std::int64_t, 4>, 4> At;  // transposed linear part
  Vec b;
  double w;
};

std::vector<IntDraw> integer_draws(const Model& model, const DrivingMeasure& mu,
                                   std::int64_t cap) {
  std::vector<IntDraw> out;
  for (const auto& dr : affine_draw_support(model, mu, cap)) {
    IntDraw idr;
    idr.b = dr.b;
    idr.w = dr.w;
    const int d = int(dr.A.rows());
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        idr.At[std::size_t(i)][std::size_t(j)] =
            (i < d && j < d) ? std::llround(dr.A(j, i)) : (i == j ? 1 : 0);
    out.push_back(std::move(idr));
  }
  return out;
}

void propagate(const std::vector<IntDraw>& draws, int d, ModeWave& wave) {
  ModeWave next;
  next.reserve(wave.size() * draws.size());
  for (const auto& [m, amp] : wave) {
    for (const auto& dr : draws) {
      Mode4 t{0, 0, 0, 0};
      for (int i = 0; i < d; ++i) {
        std::int64_t acc = 0;
        for (int j = 0; j < d; ++j) acc += dr.At[std::size_t(i)][std::size_t(j)] * m[std::size_t(j)];
        t[std::size_t(i)] = acc;
      }
      double theta = 0.0;
      for (int i = 0; i < d; ++i) theta += double(m[std::size_t(i)]) * dr.b[i];
      next[t] += amp * dr.w * phase_unit(theta);
    }
  }
  wave = std::move(next);
}

double weighted_mass(const ModeWave& wave, int d, double s) {
  std::vector<double> terms;
  terms.reserve(wave.size());
  for (const auto& [m, amp] : wave) {
    double n2 = 0.0;
    for (int i = 0; i < d; ++i) n2 += double(m[std::size_t(i)]) * double(m[std::size_t(i)]);
    terms.push_back(std::abs(amp) * std::pow(1.0 + n2, -0.5 * s));
  }
  std::sort(terms.begin(), terms.end());  // fixed order for reproducibility
  return pairwise_sum(terms);
}

}  // namespace

EssentialRadiusReport essential_radius_estimate(
    const Model& model, const DrivingMeasure& mu, double s, double r, int n_max,
    const std::vector<Mode>& probes, const Budget& budget, std::uint64_t seed) {
  if (!(s > 0.0) || s > 1.0)
    throw ConfigError("probe decay estimate needs s in (0, 1]");
  if (probes.empty()) throw ConfigError("probe set is empty");
  if (n_max < 1) throw ConfigError("n_max must be >= 1");
  if (!affine_like(model))
    throw UnsupportedError("exact mode propagation needs an affine model");
  const int d = model.dimension();
  for (const auto& p : probes) {
    if (int(p.size()) != d) throw ConfigError("probe dimension mismatch");
    double n2 = 0.0;
    for (const auto& c : p) n2 += double(c) * double(c);
    if (std::sqrt(n2) <= r)
      throw ConfigError("probe modes must lie above the radius r");
  }
  {
    const std::int64_t m = mu.support_per_draw();
    double words = 1.0;
    for (int i = 0; i < n_max; ++i) {
      words *= double(m);
      if (words > double(budget.word_cap)) {
        std::ostringstream os;
        os << "exact word sums need " << m << "^" << n_max
           << " > cap " << budget.word_cap;
        throw BudgetError(os.str());
      }
    }
  }

  const auto draws = integer_draws(model, mu, budget.word_cap);

  EssentialRadiusReport rep;
  rep.s = s;
  rep.probes = probes;
  rep.rho = Mat::Zero(std::int64_t(probes.size()), n_max);
  rep.rho_max = Vec::Zero(n_max);

  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    Mode4 start{0, 0, 0, 0};
    double n2 = 0.0;
    for (int i = 0; i < d; ++i) {
      start[std::size_t(i)] = probes[pi][std::size_t(i)];
      n2 += double(start[std::size_t(i)]) * double(start[std::size_t(i)]);
    }
    const double base_mass = std::pow(1.0 + n2, -0.5 * s);
    ModeWave wave;
    wave[start] = Complex(1.0, 0.0);
    for (int n = 1; n <= n_max; ++n) {
      propagate(draws, d, wave);
      rep.rho(std::int64_t(pi), n - 1) = weighted_mass(wave, d, s) / base_mass;
    }
  }
  for (int n = 0; n < n_max; ++n)
    rep.rho_max[n] = rep.rho.col(n).maxCoeff();

  // Least-squares slope of ln(max rho) over the tail window.
  rep.window_lo = std::max(1, (n_max + 1) / 2);
  rep.window_hi = n_max;
  {
    const int count = rep.window_hi - rep.window_lo + 1;
    if (count >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (int n = rep.window_lo; n <= rep.window_hi; ++n) {
        const double x = n, y = std::log(rep.rho_max[n - 1]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      rep.slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
      const double intercept = (sy - rep.slope * sx) / count;
      for (int n = rep.window_lo; n <= rep.window_hi; ++n)
        rep.fit_residual =
            std::max(rep.fit_residual,
                     std::fabs(std::log(rep.rho_max[n - 1]) -
                               (rep.slope * n + intercept)));
    } else {
      rep.slope = std::log(rep.rho_max[n_max - 1]) / n_max;
    }
  }
  rep.eta_hat = std::exp(rep.slope);
  rep.gapless = rep.eta_hat >= 1.0 - 1e-9;

  // Monte Carlo comparison value: sup over probe covectors of the n-step
  // average of the negative-power cotangent growth. Prefixes of one longer
  // word give every n at once. Serial accumulation keeps one fixed order.
  rep.lemma_lhs = Vec::Zero(n_max);
  {
    const std::int64_t mc = std::min<std::int64_t>(budget.mc_words, 20000);
    std::vector<Vec> xis;
    for (const auto& p : probes) {
      Vec xi(d);
      for (int i = 0; i < d; ++i) xi[i] = double(p[std::size_t(i)]);
      xis.push_back(xi / xi.norm());
    }
    Mat sums = Mat::Zero(n_max, std::int64_t(probes.size()));
    for (std::int64_t w = 0; w < mc; ++w) {
      const Word word = sample_word(mu, n_max, split_seed(seed, std::uint64_t(w)));
      Mat prefix = Mat::Identity(d, d);
      int letters_per_draw = int(word.letters.size()) / n_max;
      for (int n = 1; n <= n_max; ++n) {
        for (int l = 0; l < letters_per_draw; ++l) {
          const auto& letter =
              word.letters[std::size_t((n - 1) * letters_per_draw + l)];
          prefix = model.linear_part(MapInstance::of(letter)) * prefix;
        }
        for (std::size_t pi = 0; pi < probes.size(); ++pi)
          sums(n - 1, std::int64_t(pi)) +=
              std::pow((prefix.transpose() * xis[pi]).norm(), -s);
      }
    }
    for (int n = 1; n <= n_max; ++n)
      rep.lemma_lhs[n - 1] = sums.row(n - 1).maxCoeff() / double(mc);
  }
  return rep;
}

LasotaYorkeReport lasota_yorke_fit(const Model& model, const DrivingMeasure& mu,
                                   double s, double s_bar,
                                   const std::vector<int>& n_list,
                                   const std::vector<Mode>& probes,
                                   const Budget& budget, std::uint64_t seed) {
  if (!(s_bar > s)) throw ConfigError("s_bar must exceed s");
  if (n_list.empty()) throw ConfigError("empty n list");
  const int n_max = *std::max_element(n_list.begin(), n_list.end());

  // Keep the radius estimate's probe constraint satisfied for any probe set.
  double min_norm = std::numeric_limits<double>::infinity();
  for (const auto& p : probes) {
    double n2 = 0.0;
    for (const auto& c : p) n2 += double(c) * double(c);
    min_norm = std::min(min_norm, std::sqrt(n2));
  }

  LasotaYorkeReport rep;
  rep.radius = essential_radius_estimate(model, mu, s, min_norm - 0.5, n_max,
                                         probes, budget, seed);
  rep.eta = rep.radius.eta_hat;
  rep.gapless = rep.radius.gapless;
  rep.feasible = rep.eta < 1.0;
  rep.s = s;
  rep.s_bar = s_bar;
  rep.n_list = n_list;

  const int d = model.dimension();
  for (const int n : n_list) {
    if (n < 1 || n > n_max) throw ConfigError("n list entry out of range");
    double cn = 0.0;
    for (std::size_t pi = 0; pi < probes.size(); ++pi) {
      double n2 = 0.0;
      for (int i = 0; i < d; ++i) {
        const double c = double(probes[pi][std::size_t(i)]);
        n2 += c * c;
      }
      // Ratio of the strong and weak mode weights: (1+|k|^2)^{(s_bar-s)/2}.
      const double ratio = std::pow(1.0 + n2, 0.5 * (s_bar - s));
      const double excess =
          rep.radius.rho(std::int64_t(pi), n - 1) - std::pow(rep.eta, n);
      cn = std::max(cn, excess * ratio);
    }
    rep.C_n.push_back(std::max(0.0, cn));
  }
  for (std::size_t i = 0; i + 1 < rep.C_n.size(); ++i)
    if (rep.C_n[i] > 1e-15)
      rep.max_growth_ratio =
          std::max(rep.max_growth_ratio, rep.C_n[i + 1] / rep.C_n[i]);
  return rep;
}

std::vector<StabilityPoint> stability_sweep(const Model& base_model,
                                            const DrivingMeasure& base_mu,
                                            const std::vector<StabilityMember>& family,
                                            int K, double s,
                                            const SpectrumOptions& opts) {
  const FourierOperator base_op = build_galerkin(base_model, base_mu, K, s);
  const SpectralReport base_rep = operator_spectrum(base_op, s, opts);

  std::vector<StabilityPoint> out;
  for (const auto& member : family) {
    const FourierOperator op = build_galerkin(member.model, member.mu, K, s);
    if (op.box.size() != base_op.box.size())
      throw ConfigError("family members must share the base box");
    const SpectralReport rep = operator_spectrum(op, s, opts);
    StabilityPoint pt;
    pt.label = member.label;
    pt.subleading = rep.subleading;
    pt.subleading_modulus = rep.subleading_modulus;
    pt.deviation = std::abs(rep.subleading - base_rep.subleading);
    pt.max_truncation_loss = op.max_truncation_loss();
    try {
      pt.dd = dd_distance(base_model, base_mu, member.model, member.mu);
    } catch (const UnsupportedError&) {
      // convolution / parametric measures have no finite coupling
    } catch (const BudgetError&) {
    }
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk format.

namespace {

template <class T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

constexpr char kMagic[8] = {'R', 'D', 'S', 'L', 'O', 'P', '0', '1'};

}  // namespace

void export_operator(const FourierOperator& op, const std::string& path) {
  if (op.dim() > 4096)
    throw BudgetError("operator too large for the dense on-disk format");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, std::uint32_t(op.box.d));
  write_pod<std::uint32_t>(os, std::uint32_t(op.box.K));
  write_pod<double>(os, op.s_default);
  write_pod<std::uint64_t>(os, op.model_hash);
  write_pod<std::uint64_t>(os, std::uint64_t(op.dim()));
  const CMat dense = op.dense();
  for (std::int64_t col = 0; col < op.dim(); ++col)
    for (std::int64_t row = 0; row < op.dim(); ++row) {
      write_pod<double>(os, dense(row, col).real());
      write_pod<double>(os, dense(row, col).imag());
    }
  if (!os) throw std::runtime_error("failed writing " + path);
}

FourierOperator import_operator(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not an operator file: " + path);
  FourierOperator op;
  op.box.d = int(read_pod<std::uint32_t>(is));
  op.box.K = int(read_pod<std::uint32_t>(is));
  op.s_default = read_pod<double>(is);
  op.model_hash = read_pod<std::uint64_t>(is);
  const auto dim = std::int64_t(read_pod<std::uint64_t>(is));
  if (dim != op.box.size())
    throw std::runtime_error("operator file has inconsistent dimensions");
  Triplets trip;
  for (std::int64_t col = 0; col < dim; ++col)
    for (std::int64_t row = 0; row < dim; ++row) {
      const double re = read_pod<double>(is);
      const double im = read_pod<double>(is);
      if (re != 0.0 || im != 0.0)
        trip.emplace_back(int(row), int(col), Complex(re, im));
    }
  if (!is) throw std::runtime_error("truncated operator file: " + path);
  op.mat.resize(dim, dim);
  op.mat.setFromTriplets(trip.begin(), trip.end());
  op.truncation_loss = Vec::Zero(dim);
  return op;
}

}  // namespace rdsl
