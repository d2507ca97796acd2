#include "rdsl/cocycle.hpp"

#include "rdsl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rdsl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

void CotangentFrame::validate() const {
  if (covector.size() == 0) throw ConfigError("empty covector");
  if (std::fabs(covector.norm() - 1.0) > 1e-12)
    throw ConfigError("covector must have unit norm");
}

void PlaneFrame::validate() const {
  const int kk = int(basis.cols());
  if (kk < 1 || kk > basis.rows())
    throw ConfigError("plane dimension must satisfy 1 <= k <= d");
  const Mat gram = basis.transpose() * basis;
  if ((gram - Mat::Identity(kk, kk)).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("plane basis must be orthonormal");
}

double cotangent_log_growth(const Model& model, const Word& word,
                            const TorusPoint& x0, const Vec& covector) {
  if (covector.norm() < 1e-300) throw ConfigError("zero covector");
  Vec w = covector / covector.norm();
  TorusPoint x = x0;
  double total = 0.0;
  for (const auto& l : word.letters) {
    const MapInstance f = MapInstance::of(l);
    const JacobianPair jp = model.jacobian_pair(f, x);
    w = jp.cojac * w;
    const double nrm = w.norm();
    total += std::log(nrm);
    w /= nrm;
    x = model.apply(f, x);
  }
  return total;
}

double tangent_log_growth(const Model& model, const Word& word,
                          const TorusPoint& x0, const Vec& vector) {
  if (vector.norm() < 1e-300) throw ConfigError("zero vector");
  Vec v = vector / vector.norm();
  TorusPoint x = x0;
  double total = 0.0;
  for (const auto& l : word.letters) {
    const MapInstance f = MapInstance::of(l);
    const JacobianPair jp = model.jacobian_pair(f, x);
    v = jp.jac * v;
    const double nrm = v.norm();
    total += std::log(nrm);
    v /= nrm;
    x = model.apply(f, x);
  }
  return total;
}

double covolume_log_growth(const Model& model, const Word& word,
                           const TorusPoint& x0, const Mat& basis) {
  const int d = int(basis.rows());
  const int k = int(basis.cols());
  Mat q = basis;
  TorusPoint x = x0;
  double total = 0.0;
  for (const auto& l : word.letters) {
    const MapInstance f = MapInstance::of(l);
    const JacobianPair jp = model.jacobian_pair(f, x);
    const Mat g = jp.jac * q;
    Eigen::HouseholderQR<Mat> qr(g);
    const Mat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (int i = 0; i < k; ++i) total += std::log(std::fabs(r(i, i)));
    q = qr.householderQ() * Mat::Identity(d, k);
    x = model.apply(f, x);
  }
  return total;
}

namespace {

// One shared realization of words: the exact support when it fits the
// budget, otherwise counter-seeded Monte Carlo samples generated on demand.
struct WordSource {
  const DrivingMeasure* mu = nullptr;
  int N = 1;
  std::uint64_t seed = 0;
  std::vector<Word> exact_words;
  bool exact = false;
  bool fell_back = false;
  std::int64_t mc_count = 0;

  std::int64_t count() const {
    return exact ? std::int64_t(exact_words.size()) : mc_count;
  }
  Word word(std::int64_t i) const {
    if (exact) return exact_words[std::size_t(i)];
    return sample_word(*mu, N, split_seed(seed, std::uint64_t(i)));
  }
  double weight(std::int64_t i) const {
    return exact ? exact_words[std::size_t(i)].weight : 1.0 / double(mc_count);
  }
};

WordSource realize_words(const DrivingMeasure& mu, int N, const Budget& budget,
                         std::uint64_t seed) {
  WordSource src;
  src.mu = &mu;
  src.N = N;
  src.seed = seed;
  if (!mu.has_parametric_leaf()) {
    try {
      src.exact_words = enumerate_words(mu, N, budget.word_cap);
      src.exact = true;
      return src;
    } catch (const BudgetError&) {
      src.fell_back = true;  // exact mode unaffordable; sample instead
    }
  }
  src.exact = false;
  src.mc_count = budget.mc_words;
  return src;
}

ExpansionEstimate reduce_estimate(const WordSource& src, int N,
                                  std::span<const double> totals) {
  ExpansionEstimate est;
  est.steps = N;
  est.samples = src.count();
  est.fell_back_to_monte_carlo = src.fell_back;
  if (src.exact) {
    est.mode = EstimateMode::ExactEnumeration;
    std::vector<double> weighted(totals.size());
    for (std::size_t i = 0; i < totals.size(); ++i)
      weighted[i] = src.weight(std::int64_t(i)) * totals[i];
    est.value = pairwise_sum(weighted) / double(N);
    est.stderr_ = 0.0;
  } else {
    est.mode = EstimateMode::MonteCarlo;
    const MeanStderr ms = mean_stderr(totals);
    est.value = ms.mean / double(N);
    est.stderr_ = ms.stderr_ / double(N);
  }
  return est;
}

template <class PerWord>
ExpansionEstimate estimate_over_words(const WordSource& src, int N, Exec exec,
                                      PerWord&& per_word) {
  const std::int64_t n = src.count();
  std::vector<double> totals(static_cast<std::size_t>(n));
  for_each_index(n, exec, [&](std::int64_t i) {
    totals[std::size_t(i)] = per_word(src.word(i));
  });
  return reduce_estimate(src, N, totals);
}

}  // namespace

ExpansionEstimate cotangent_expansion(const Model& model,
                                      const DrivingMeasure& mu, int N,
                                      const CotangentFrame& frame,
                                      const Budget& budget, std::uint64_t seed,
                                      Exec exec) {
  if (N < 1) throw ConfigError("N must be >= 1");
  frame.validate();
  const WordSource src = realize_words(mu, N, budget, seed);
  ExpansionEstimate est =
      estimate_over_words(src, N, exec, [&](const Word& w) {
        return cotangent_log_growth(model, w, frame.base, frame.covector);
      });
  est.witness = Witness{frame.base, frame.covector};
  return est;
}

ExpansionEstimate tangent_expansion(const Model& model, const DrivingMeasure& mu,
                                    int N, const TorusPoint& base,
                                    const Vec& vector, const Budget& budget,
                                    std::uint64_t seed, Exec exec) {
  if (N < 1) throw ConfigError("N must be >= 1");
  if (std::fabs(vector.norm() - 1.0) > 1e-12)
    throw ConfigError("vector must have unit norm");
  const WordSource src = realize_words(mu, N, budget, seed);
  ExpansionEstimate est =
      estimate_over_words(src, N, exec, [&](const Word& w) {
        return tangent_log_growth(model, w, base, vector);
      });
  est.witness = Witness{base, vector};
  return est;
}

ExpansionEstimate kplane_expansion(const Model& model, const DrivingMeasure& mu,
                                   int N, const PlaneFrame& plane,
                                   const Budget& budget, std::uint64_t seed,
                                   Exec exec) {
  if (N < 1) throw ConfigError("N must be >= 1");
  plane.validate();
  const WordSource src = realize_words(mu, N, budget, seed);
  ExpansionEstimate est =
      estimate_over_words(src, N, exec, [&](const Word& w) {
        return covolume_log_growth(model, w, plane.base, plane.basis);
      });
  est.witness = Witness{plane.base, plane.basis};
  return est;
}

ConormalCheck conormal_check(const Model& model, const Word& word,
                             const PlaneFrame& plane) {
  if (!model.volume_preserving())
    throw UnsupportedError(
        "conormal identity requires a volume-preserving model");
  const int d = model.dimension();
  if (plane.k() != d - 1)
    throw ConfigError("conormal check needs a (d-1)-plane");
  plane.validate();

  ConormalCheck out;
  out.covolume_growth =
      std::exp(covolume_log_growth(model, word, plane.base, plane.basis));

  // Unit conormal: the orthogonal complement of the plane, read off the
  // full QR of the basis.
  Eigen::HouseholderQR<Mat> qr(plane.basis);
  const Mat qfull = qr.householderQ() * Mat::Identity(d, d);
  const Vec conormal = qfull.col(d - 1);
  out.conormal_growth =
      std::exp(cotangent_log_growth(model, word, plane.base, conormal));
  return out;
}

namespace {

// Low-discrepancy unit directions. d = 2 uses equispaced angles; higher
// dimensions map Halton points through Box-Muller and normalize.
double halton(std::int64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * double(index % base);
    index /= base;
  }
  return r;
}

std::vector<Vec> sphere_directions(int d, int count) {
  std::vector<Vec> dirs;
  dirs.reserve(std::size_t(count));
  if (d == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    dirs.push_back(Vec::Constant(1, -1.0));
    return dirs;
  }
  if (d == 2) {
    for (int j = 0; j < count; ++j) {
      const double a = kTwoPi * double(j) / double(count);
      Vec v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(std::move(v));
    }
    return dirs;
  }
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
  const int pairs = (d + 1) / 2;
  for (int j = 0; j < count; ++j) {
    Vec v(d);
    for (int c = 0; c < pairs; ++c) {
      double u1 = halton(j + 1, primes[(2 * c) % 8]);
      const double u2 = halton(j + 1, primes[(2 * c + 1) % 8]);
      if (u1 <= 1e-12) u1 = 1e-12;
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double a = kTwoPi * u2;
      v[2 * c] = r * std::cos(a);
      if (2 * c + 1 < d) v[2 * c + 1] = r * std::sin(a);
    }
    const double nrm = v.norm();
    if (nrm > 1e-12) dirs.push_back(v / nrm);
  }
  return dirs;
}

std::vector<TorusPoint> base_lattice(const Model& model, int per_dim) {
  const int d = model.dimension();
  if (model.point_base() || model.constant_jacobian())
    return {TorusPoint::zero(d)};
  std::vector<TorusPoint> pts;
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= per_dim;
  pts.reserve(std::size_t(total));
  Vec x(d);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::int64_t r = idx;
    for (int i = 0; i < d; ++i) {
      x[i] = double(r % per_dim) / double(per_dim);
      r /= per_dim;
    }
    pts.emplace_back(x);
  }
  return pts;
}

// Per-word cocycle matrices at a fixed base point, so the covector search
// reuses the orbit work across all directions.
struct CocycleCache {
  std::vector<Mat> mats;

  void build(const Model& model, const WordSource& src, CocycleKind kind,
             const TorusPoint& x0, Exec exec) {
    const std::int64_t n = src.count();
    mats.assign(std::size_t(n), Mat());
    for_each_index(n, exec, [&](std::int64_t i) {
      const Word w = src.word(i);
      const int d = model.dimension();
      Mat m = Mat::Identity(d, d);
      TorusPoint x = x0;
      for (const auto& l : w.letters) {
        const MapInstance f = MapInstance::of(l);
        const JacobianPair jp = model.jacobian_pair(f, x);
        m = (kind == CocycleKind::Cotangent ? jp.cojac : jp.jac) * m;
        x = model.apply(f, x);
      }
      mats[std::size_t(i)] = std::move(m);
    });
  }

  void values(const Vec& xi, std::vector<double>& out) const {
    for (std::size_t i = 0; i < mats.size(); ++i)
      out[i] = std::log((mats[i] * xi).norm());
  }
};

}  // namespace

ExpansionEstimate expansion_lambda(const Model& model, const DrivingMeasure& mu,
                                   int N, CocycleKind kind,
                                   const SearchPlan& plan, const Budget& budget,
                                   std::uint64_t seed, Exec exec) {
  if (N < 1) throw ConfigError("N must be >= 1");
  const int d = model.dimension();
  const int per_dim = plan.base_points_per_dim > 0 ? plan.base_points_per_dim
                      : d <= 2                     ? 16
                                                   : 8;
  const int n_dirs = plan.directions > 0 ? plan.directions
                     : d == 2            ? 64
                                         : 256;
  const auto bases = base_lattice(model, per_dim);
  const auto dirs = sphere_directions(d, n_dirs);
  if (bases.empty() || dirs.empty()) throw ConfigError("empty search plan");

  const WordSource src = realize_words(mu, N, budget, seed);
  const std::int64_t n_words = src.count();

  double best_mean = std::numeric_limits<double>::infinity();
  std::size_t best_base = 0;
  Vec best_dir = dirs.front();

  CocycleCache cache;
  std::vector<double> totals(static_cast<std::size_t>(n_words));
  const auto weighted_mean = [&](std::span<const double> vals) {
    if (src.exact) {
      std::vector<double> weighted(vals.size());
      for (std::size_t i = 0; i < vals.size(); ++i)
        weighted[i] = src.weight(std::int64_t(i)) * vals[i];
      return pairwise_sum(weighted);
    }
    return pairwise_sum(vals) / double(vals.size());
  };

  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    cache.build(model, src, kind, bases[bi], exec);
    for (const auto& dir : dirs) {
      cache.values(dir, totals);
      const double v = weighted_mean(totals);
      if (v < best_mean) {
        best_mean = v;
        best_base = bi;
        best_dir = dir;
      }
    }
  }

  // Local refinement: coordinate descent on the covector sphere around the
  // incumbent, halving the step after each round.
  cache.build(model, src, kind, bases[best_base], exec);
  double step = plan.initial_step > 0.0
                    ? plan.initial_step
                    : (d == 2 ? kTwoPi / double(n_dirs) : 0.25);
  for (int round = 0; round < plan.refine_rounds; ++round) {
    for (int iter = 0; iter < 32; ++iter) {
      bool improved = false;
      for (int axis = 0; axis < d; ++axis) {
        for (const double sgn : {1.0, -1.0}) {
          Vec cand = best_dir;
          cand[axis] += sgn * step;
          const double nrm = cand.norm();
          if (nrm < 1e-12) continue;
          cand /= nrm;
          cache.values(cand, totals);
          const double v = weighted_mean(totals);
          if (v < best_mean - 1e-15) {
            best_mean = v;
            best_dir = cand;
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
    step *= 0.5;
  }

  cache.values(best_dir, totals);
  ExpansionEstimate est = reduce_estimate(src, N, totals);
  est.witness = Witness{bases[best_base], best_dir};
  return est;
}

namespace {

// Letters of draw t, deterministically derived from (seed, t).
std::vector<Letter> draw_letters(const DrivingMeasure& mu, std::uint64_t seed,
                                 std::int64_t t) {
  const Word w = sample_word(mu, 1, split_seed(seed, std::uint64_t(t)));
  return w.letters;
}

}  // namespace

LyapunovReport lyapunov_spectrum(const Model& model, const DrivingMeasure& mu,
                                 std::int64_t T, const TorusPoint& x0,
                                 std::uint64_t seed, int reorth_period) {
  if (T < 1000) throw ConfigError("orbit length must be at least 10^3");
  const int d = model.dimension();
  const int batches = 20;

  int period = std::max(1, reorth_period);
  bool retried = false;

  for (;;) {
    Mat q = Mat::Identity(d, d);
    Mat m = q;
    TorusPoint x = x0;
    Vec totals = Vec::Zero(d);
    Mat batch_sums = Mat::Zero(batches, d);
    bool blown_up = false;

    const std::int64_t per_batch = T / batches;
    for (std::int64_t t = 0; t < T && !blown_up; ++t) {
      for (const auto& l : draw_letters(mu, seed, t)) {
        const MapInstance f = MapInstance::of(l);
        m = model.jacobian_pair(f, x).jac * m;
        x = model.apply(f, x);
      }
      if ((t + 1) % period == 0 || t + 1 == T) {
        if (!m.allFinite() || m.cwiseAbs().maxCoeff() > 1e150) {
          blown_up = true;
          break;
        }
        Eigen::HouseholderQR<Mat> qr(m);
        const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        const int batch = int(std::min<std::int64_t>(t / std::max<std::int64_t>(per_batch, 1), batches - 1));
        for (int i = 0; i < d; ++i) {
          const double lg = std::log(std::fabs(r(i, i)));
          totals[i] += lg;
          batch_sums(batch, i) += lg;
        }
        q = qr.householderQ() * Mat::Identity(d, d);
        m = q;
      }
    }

    if (blown_up) {
      if (!retried && period > 1) {
        period = std::max(1, period / 2);
        retried = true;
        continue;
      }
      throw std::runtime_error("lyapunov estimate blew up numerically");
    }

    LyapunovReport rep;
    rep.orbit_length = T;
    rep.reorth_period = period;
    rep.retried = retried;
    std::vector<std::pair<double, double>> expc(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      double mean = 0.0, var = 0.0;
      for (int b = 0; b < batches; ++b)
        mean += batch_sums(b, i) / double(per_batch);
      mean /= batches;
      for (int b = 0; b < batches; ++b) {
        const double diff = batch_sums(b, i) / double(per_batch) - mean;
        var += diff * diff;
      }
      var /= (batches - 1);
      expc[std::size_t(i)] = {totals[i] / double(T),
                              2.0 * std::sqrt(var / batches)};
    }
    std::sort(expc.begin(), expc.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    rep.exponents = Vec(d);
    rep.confidence = Vec(d);
    for (int i = 0; i < d; ++i) {
      rep.exponents[i] = expc[std::size_t(i)].first;
      rep.confidence[i] = expc[std::size_t(i)].second;
    }
    return rep;
  }
}

FurstenbergEstimate furstenberg_integral(const Model& model,
                                         const DrivingMeasure& mu,
                                         std::int64_t burn_in,
                                         std::int64_t samples,
                                         std::uint64_t seed,
                                         std::optional<Vec> v0) {
  if (model.variant() != ModelVariant::LinearCocycle &&
      model.variant() != ModelVariant::AffineTorus)
    throw UnsupportedError(
        "furstenberg integral needs a projectivizable linear fiber");
  if (samples < 20) throw ConfigError("need at least 20 samples");
  const int d = model.dimension();

  Vec v;
  if (v0) {
    v = *v0;
    if (v.norm() < 1e-300) throw ConfigError("zero start vector");
  } else {
    RngStream rng(seed, 0xF00DULL);
    v = Vec(d);
    for (int i = 0; i < d; ++i) v[i] = rng.next_gaussian();
  }
  v /= v.norm();

  const int batches = 20;
  const std::int64_t per_batch = samples / batches;
  std::vector<double> values;
  values.reserve(std::size_t(samples));

  for (std::int64_t t = 0; t < burn_in + samples; ++t) {
    for (const auto& l : draw_letters(mu, seed, t)) {
      const Mat f = model.linear_part(MapInstance::of(l));
      v = f * v;
    }
    const double nrm = v.norm();
    if (t >= burn_in) values.push_back(std::log(nrm));
    v /= nrm;
  }

  FurstenbergEstimate est;
  est.samples = std::int64_t(values.size());
  est.value = pairwise_sum(values) / double(values.size());
  std::vector<double> batch_means;
  for (int b = 0; b < batches; ++b) {
    const auto begin = std::size_t(b * per_batch);
    const auto count = std::size_t(b == batches - 1
                                       ? std::int64_t(values.size()) -
                                             std::int64_t(begin)
                                       : per_batch);
    batch_means.push_back(
        pairwise_sum(std::span<const double>(values.data() + begin, count)) /
        double(count));
  }
  const MeanStderr ms = mean_stderr(batch_means);
  est.stderr_ = ms.stderr_;
  return est;
}

}  // namespace rdsl
