#include "rdsl/measure.hpp"

#include "rdsl/models.hpp"
#include "rdsl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rdsl {

const char* to_string(MapTransform t) {
  switch (t) {
    case MapTransform::Identity: return "identity";
    case MapTransform::Inverse: return "inverse";
    case MapTransform::Transpose: return "transpose";
    case MapTransform::InverseTranspose: return "inverse-transpose";
  }
  return "?";
}

DrivingMeasure DrivingMeasure::finite(std::vector<MapAtom> atoms) {
  DrivingMeasure m;
  m.kind = MeasureKind::FiniteAtoms;
  m.atoms = std::move(atoms);
  m.validate();
  return m;
}

DrivingMeasure DrivingMeasure::uniform_on(const std::vector<int>& map_ids) {
  std::vector<MapAtom> atoms;
  atoms.reserve(map_ids.size());
  const double w = 1.0 / double(map_ids.size());
  for (int id : map_ids) atoms.push_back(MapAtom{id, w, std::nullopt});
  return finite(std::move(atoms));
}

DrivingMeasure DrivingMeasure::dirac(int map_id) {
  return finite({MapAtom{map_id, 1.0, std::nullopt}});
}

DrivingMeasure DrivingMeasure::uniform_phase(int family_map_id, double period) {
  DrivingMeasure m;
  m.kind = MeasureKind::ParametricUniformPhase;
  m.family_map_id = family_map_id;
  m.phase_period = period;
  m.validate();
  return m;
}

DrivingMeasure DrivingMeasure::convolution(std::vector<DrivingMeasure> factors) {
  DrivingMeasure m;
  m.kind = MeasureKind::Convolution;
  m.factors = std::move(factors);
  m.validate();
  return m;
}

void DrivingMeasure::validate() const {
  switch (kind) {
    case MeasureKind::FiniteAtoms: {
      if (atoms.empty()) throw ConfigError("finite measure has no atoms");
      long double sum = 0.0L;  // large atom tables need the extra headroom
      for (const auto& a : atoms) {
        if (a.weight < 0.0 || a.weight > 1.0)
          throw ConfigError("atom weight outside [0,1]");
        sum += a.weight;
      }
      if (std::fabs(double(sum - 1.0L)) > 1e-12) {
        std::ostringstream os;
        os << "finite measure weights sum to " << sum << ", expected 1";
        throw ConfigError(os.str());
      }
      break;
    }
    case MeasureKind::ParametricUniformPhase:
      if (!(phase_period > 0.0))
        throw ConfigError("parametric measure needs a positive phase period");
      break;
    case MeasureKind::Convolution:
      if (factors.empty())
        throw ConfigError("convolution measure needs at least one factor");
      for (const auto& f : factors) f.validate();
      break;
  }
}

bool DrivingMeasure::has_parametric_leaf() const {
  if (kind == MeasureKind::ParametricUniformPhase) return true;
  if (kind == MeasureKind::Convolution) {
    for (const auto& f : factors)
      if (f.has_parametric_leaf()) return true;
  }
  return false;
}

int DrivingMeasure::letters_per_draw() const {
  if (kind != MeasureKind::Convolution) return 1;
  int n = 0;
  for (const auto& f : factors) n += f.letters_per_draw();
  return n;
}

std::int64_t DrivingMeasure::support_per_draw() const {
  switch (kind) {
    case MeasureKind::FiniteAtoms: return std::int64_t(atoms.size());
    case MeasureKind::ParametricUniformPhase:
      throw UnsupportedError(
          "parametric measures have no finite support to enumerate");
    case MeasureKind::Convolution: {
      std::int64_t m = 1;
      for (const auto& f : factors) m *= f.support_per_draw();
      return m;
    }
  }
  return 0;
}

void stream_draw(const DrivingMeasure& m, RngStream& rng,
                 const std::function<void(const Letter&)>& sink) {
  switch (m.kind) {
    case MeasureKind::FiniteAtoms: {
      const double u = rng.next_unit();
      double acc = 0.0;
      const MapAtom* chosen = &m.atoms.back();
      for (const auto& a : m.atoms) {
        acc += a.weight;
        if (u < acc) {
          chosen = &a;
          break;
        }
      }
      Letter l;
      l.map_id = chosen->map_id;
      l.weight = chosen->weight;
      if (chosen->phase) {
        l.phase = *chosen->phase;
        l.has_phase = true;
      }
      l.transform = m.transform;
      sink(l);
      break;
    }
    case MeasureKind::ParametricUniformPhase: {
      Letter l;
      l.map_id = m.family_map_id;
      l.phase = rng.next_unit() * m.phase_period;
      l.has_phase = true;
      l.weight = 1.0;  // density placeholder
      l.transform = m.transform;
      sink(l);
      break;
    }
    case MeasureKind::Convolution:
      for (const auto& f : m.factors) stream_draw(f, rng, sink);
      break;
  }
}

Word sample_word(const DrivingMeasure& measure, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("word length must be >= 1");
  measure.validate();
  Word w;
  w.draws = n;
  w.letters.reserve(std::size_t(n) * measure.letters_per_draw());
  for (int i = 0; i < n; ++i) {
    RngStream rng(seed, std::uint64_t(i));
    stream_draw(measure, rng, [&](const Letter& l) { w.letters.push_back(l); });
  }
  w.weight = 1.0;
  for (const auto& l : w.letters) w.weight *= l.weight;
  return w;
}

namespace {

// Flattened per-draw support of a finitely supported (possibly convolved)
// measure: each entry is the letter sequence of one draw with its weight.
struct DrawSupport {
  std::vector<std::vector<Letter>> draws;
  std::vector<double> weights;
};

void build_support(const DrivingMeasure& m, DrawSupport& out) {
  switch (m.kind) {
    case MeasureKind::FiniteAtoms: {
      DrawSupport next;
      for (const auto& a : m.atoms) {
        Letter l;
        l.map_id = a.map_id;
        l.weight = a.weight;
        if (a.phase) {
          l.phase = *a.phase;
          l.has_phase = true;
        }
        l.transform = m.transform;
        if (out.draws.empty()) {
          next.draws.push_back({l});
          next.weights.push_back(a.weight);
        } else {
          for (std::size_t i = 0; i < out.draws.size(); ++i) {
            auto seq = out.draws[i];
            seq.push_back(l);
            next.draws.push_back(std::move(seq));
            next.weights.push_back(out.weights[i] * a.weight);
          }
        }
      }
      out = std::move(next);
      break;
    }
    case MeasureKind::ParametricUniformPhase:
      throw UnsupportedError(
          "parametric measures cannot be enumerated; sample instead");
    case MeasureKind::Convolution:
      for (const auto& f : m.factors) build_support(f, out);
      break;
  }
}

}  // namespace

std::vector<Word> enumerate_words(const DrivingMeasure& measure, int n,
                                  std::int64_t cap) {
  if (n < 1) throw ConfigError("word length must be >= 1");
  measure.validate();
  const std::int64_t m = measure.support_per_draw();

  // m^n with overflow guard.
  double total_d = std::pow(double(m), double(n));
  if (total_d > 2.0 * double(cap)) {
    std::ostringstream os;
    os << "enumeration budget exceeded: " << m << "^" << n << " = "
       << std::llround(total_d) << " words > cap " << cap;
    throw BudgetError(os.str());
  }
  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= m;
  if (total > cap) {
    std::ostringstream os;
    os << "enumeration budget exceeded: " << m << "^" << n << " = " << total
       << " words > cap " << cap;
    throw BudgetError(os.str());
  }

  DrawSupport support;
  build_support(measure, support);

  std::vector<Word> words;
  words.reserve(std::size_t(total));
  std::vector<std::int64_t> odo(std::size_t(n), 0);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    Word w;
    w.draws = n;
    w.weight = 1.0;
    for (int step = 0; step < n; ++step) {
      const auto& seq = support.draws[std::size_t(odo[std::size_t(step)])];
      w.letters.insert(w.letters.end(), seq.begin(), seq.end());
      w.weight *= support.weights[std::size_t(odo[std::size_t(step)])];
    }
    words.push_back(std::move(w));
    for (int step = 0; step < n; ++step) {
      if (++odo[std::size_t(step)] < m) break;
      odo[std::size_t(step)] = 0;
    }
  }
  return words;
}

DrivingMeasure transform_measure(const DrivingMeasure& measure,
                                 MapTransform kind, const Model* model) {
  if (model && !model->supports(kind)) {
    std::ostringstream os;
    os << "model does not support the " << to_string(kind) << " transform";
    throw UnsupportedError(os.str());
  }
  DrivingMeasure out = measure;
  if (out.kind == MeasureKind::Convolution) {
    // (f_q ... f_1)^{-1} and (f_q ... f_1)^T reverse the factor order;
    // the inverse-transpose keeps it.
    const bool reverse = kind == MapTransform::Inverse ||
                         kind == MapTransform::Transpose;
    for (auto& f : out.factors) f = transform_measure(f, kind, model);
    if (reverse) std::reverse(out.factors.begin(), out.factors.end());
  } else {
    out.transform = compose(out.transform, kind);
  }
  return out;
}

namespace {

// C^2 discrepancy between two realized maps: grid maximum over value,
// first-derivative, and second-derivative differences.
double c2_distance(const Model& ma, const MapInstance& fa, const Model& mb,
                   const MapInstance& fb, const std::vector<TorusPoint>& grid) {
  double worst = 0.0;
  for (const auto& x : grid) {
    const TorusPoint ya = ma.apply(fa, x);
    const TorusPoint yb = mb.apply(fb, x);
    worst = std::max(worst, torus_dist(ya, yb));
    const Mat ja = ma.jacobian_pair(fa, x).jac;
    const Mat jb = mb.jacobian_pair(fb, x).jac;
    worst = std::max(worst, (ja - jb).cwiseAbs().maxCoeff());
    const auto ha = ma.second_derivative(fa, x);
    const auto hb = mb.second_derivative(fb, x);
    for (std::size_t i = 0; i < ha.size(); ++i)
      worst = std::max(worst, (ha[i] - hb[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::vector<TorusPoint> make_grid(int d, int points_per_dim) {
  std::vector<TorusPoint> grid;
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= points_per_dim;
  grid.reserve(std::size_t(total));
  Vec x(d);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::int64_t r = idx;
    for (int i = 0; i < d; ++i) {
      x[i] = double(r % points_per_dim) / double(points_per_dim);
      r /= points_per_dim;
    }
    grid.emplace_back(x);
  }
  return grid;
}

MapInstance instance_of(const MapAtom& a, MapTransform t) {
  MapInstance f;
  f.map_id = a.map_id;
  if (a.phase) {
    f.phase = *a.phase;
    f.has_phase = true;
  }
  f.transform = t;
  return f;
}

}  // namespace

double dd_distance(const Model& model_a, const DrivingMeasure& mu_a,
                   const Model& model_b, const DrivingMeasure& mu_b,
                   const DdGrid& grid_spec) {
  if (mu_a.kind != MeasureKind::FiniteAtoms ||
      mu_b.kind != MeasureKind::FiniteAtoms)
    throw UnsupportedError("dd distance requires finite-atom measures");
  const std::size_t na = mu_a.atoms.size();
  const std::size_t nb = mu_b.atoms.size();
  if (na > 64 || nb > 64)
    throw BudgetError("dd distance limited to 64 atoms per measure");
  if (grid_spec.points_per_dim < 1) throw ConfigError("dd grid is empty");
  if (model_a.dimension() != model_b.dimension())
    throw ConfigError("dd distance needs a common state space");
  if (model_a.point_base() || model_b.point_base())
    throw UnsupportedError("dd distance is defined for torus models");

  const auto grid = make_grid(model_a.dimension(), grid_spec.points_per_dim);

  Mat cost(na, nb);
  for (std::size_t i = 0; i < na; ++i) {
    const auto fi = instance_of(mu_a.atoms[i], mu_a.transform);
    const auto fi_inv =
        instance_of(mu_a.atoms[i], compose(mu_a.transform, MapTransform::Inverse));
    for (std::size_t j = 0; j < nb; ++j) {
      const auto gj = instance_of(mu_b.atoms[j], mu_b.transform);
      const auto gj_inv = instance_of(
          mu_b.atoms[j], compose(mu_b.transform, MapTransform::Inverse));
      const double fwd = c2_distance(model_a, fi, model_b, gj, grid);
      const double bwd = c2_distance(model_a, fi_inv, model_b, gj_inv, grid);
      cost(Eigen::Index(i), Eigen::Index(j)) = std::sqrt(fwd + bwd);
    }
  }

  Vec supply(na), demand(nb);
  for (std::size_t i = 0; i < na; ++i) supply[Eigen::Index(i)] = mu_a.atoms[i].weight;
  for (std::size_t j = 0; j < nb; ++j) demand[Eigen::Index(j)] = mu_b.atoms[j].weight;
  return transport_lp(cost, supply, demand);
}

}  // namespace rdsl
