#include "rdsl/stats.hpp"

#include "rdsl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace rdsl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mode negate(const Mode& k) {
  Mode out = k;
  for (auto& c : out) c = -c;
  return out;
}

}  // namespace

Observable Observable::cosine(const Mode& k, double amplitude) {
  Observable phi;
  phi.d = int(k.size());
  phi.coeffs.push_back({k, Complex(0.5 * amplitude, 0.0)});
  phi.coeffs.push_back({negate(k), Complex(0.5 * amplitude, 0.0)});
  return phi;
}

Complex Observable::eval(const TorusPoint& x) const {
  Complex acc = 0.0;
  for (const auto& [k, c] : coeffs) {
    double theta = 0.0;
    for (int i = 0; i < d; ++i) theta += double(k[std::size_t(i)]) * x.coords()[i];
    acc += c * std::polar(1.0, kTwoPi * theta);
  }
  return acc;
}

double Observable::eval_real(const TorusPoint& x) const {
  return eval(x).real();
}

double Observable::l2_norm2() const {
  double s = 0.0;
  for (const auto& [k, c] : coeffs) s += std::norm(c);
  return s;
}

bool Observable::zero_mean(double tol) const {
  for (const auto& [k, c] : coeffs) {
    bool is_zero = true;
    for (const auto& comp : k) is_zero = is_zero && comp == 0;
    if (is_zero && std::abs(c) > tol) return false;
  }
  return true;
}

bool Observable::real_valued(double tol) const {
  for (const auto& [k, c] : coeffs) {
    Complex conj_coeff = 0.0;
    const Mode nk = negate(k);
    for (const auto& [k2, c2] : coeffs)
      if (k2 == nk) conj_coeff += c2;
    if (std::abs(std::conj(c) - conj_coeff) > tol) return false;
  }
  return true;
}

int Observable::max_abs_mode() const {
  std::int64_t m = 0;
  for (const auto& [k, c] : coeffs)
    for (const auto& comp : k)
      m = std::max(m, static_cast<std::int64_t>(std::llabs(comp)));
  return int(m);
}

Complex inner_product(const Observable& phi, const Observable& psi) {
  Complex acc = 0.0;
  for (const auto& [k, c] : phi.coeffs)
    for (const auto& [k2, c2] : psi.coeffs)
      if (k == k2) acc += std::conj(c) * c2;
  return acc;
}

namespace {

CVec embed(const Observable& phi, const ModeBox& box) {
  if (phi.max_abs_mode() > box.K)
    throw ConfigError("observable modes exceed the operator box");
  CVec c = CVec::Zero(box.size());
  for (const auto& [k, coef] : phi.coeffs) c[box.index_of(k)] += coef;
  return c;
}

}  // namespace

CorrelationSeries correlation_series_operator(const FourierOperator& op,
                                              const Observable& phi,
                                              const Observable& psi,
                                              int n_max) {
  if (phi.d != op.box.d || psi.d != op.box.d)
    throw ConfigError("observable dimension mismatch");
  CorrelationSeries out;
  out.method = SeriesMethod::Operator;
  const CVec phi_c = embed(phi, op.box);
  CVec c = embed(psi, op.box);
  for (int n = 0; n <= n_max; ++n) {
    out.values.push_back(phi_c.dot(c));  // Eigen dot conjugates the left side
    out.stderrs.push_back(0.0);
    if (n < n_max) c = op.apply(c);
  }
  return out;
}

namespace {

// Shared orbit kernel: per trial, a uniform start and counter-seeded draws.
// visit(n, x) is called at n = 0 (before any map) through n = n_draws.
template <class Visit>
void run_orbit(const Model& model, const DrivingMeasure& mu,
               std::uint64_t trial_seed, std::int64_t n_draws, Visit&& visit) {
  const int d = model.dimension();
  RngStream start_rng(trial_seed, 0x8000000000000000ULL);
  Vec x0(d);
  for (int i = 0; i < d; ++i) x0[i] = start_rng.next_unit();
  TorusPoint x(std::move(x0));
  visit(0, x);
  for (std::int64_t n = 0; n < n_draws; ++n) {
    RngStream rng(trial_seed, std::uint64_t(n));
    stream_draw(mu, rng, [&](const Letter& l) {
      x = model.apply(MapInstance::of(l), x);
    });
    visit(n + 1, x);
  }
}

}  // namespace

CorrelationSeries correlation_series_mc(const Model& model,
                                        const DrivingMeasure& mu,
                                        const Observable& phi,
                                        const Observable& psi, int n_max,
                                        std::int64_t samples,
                                        std::uint64_t seed, Exec exec) {
  if (samples < 2) throw ConfigError("need at least 2 samples");
  CorrelationSeries out;
  out.method = SeriesMethod::MonteCarlo;

  std::vector<std::vector<Complex>> vals(
      std::size_t(n_max + 1), std::vector<Complex>(std::size_t(samples)));
  for_each_index(samples, exec, [&](std::int64_t t) {
    const std::uint64_t trial_seed = split_seed(seed, std::uint64_t(t));
    Complex phi0;
    run_orbit(model, mu, trial_seed, n_max, [&](std::int64_t n, const TorusPoint& x) {
      if (n == 0) phi0 = std::conj(phi.eval(x));
      vals[std::size_t(n)][std::size_t(t)] = phi0 * psi.eval(x);
    });
  });

  for (int n = 0; n <= n_max; ++n) {
    std::vector<double> re(static_cast<std::size_t>(samples)), im(static_cast<std::size_t>(samples));
    for (std::int64_t t = 0; t < samples; ++t) {
      re[std::size_t(t)] = vals[std::size_t(n)][std::size_t(t)].real();
      im[std::size_t(t)] = vals[std::size_t(n)][std::size_t(t)].imag();
    }
    const MeanStderr mre = mean_stderr(re);
    const MeanStderr mim = mean_stderr(im);
    out.values.push_back(Complex(mre.mean, mim.mean));
    out.stderrs.push_back(std::hypot(mre.stderr_, mim.stderr_));
  }
  return out;
}

MixingFit mixing_rate_fit(const CorrelationSeries& series) {
  if (series.values.size() < 6)
    throw ConfigError("series too short for a rate fit");
  MixingFit fit;
  const int n = int(series.values.size());

  // Longest contiguous run above the noise floor.
  std::vector<bool> ok(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double floor = series.method == SeriesMethod::Operator
                             ? 1e-13
                             : 10.0 * series.stderrs[std::size_t(i)];
    ok[std::size_t(i)] = std::abs(series.values[std::size_t(i)]) > floor;
  }
  int best_lo = 0, best_len = 0, lo = -1;
  for (int i = 0; i <= n; ++i) {
    if (i < n && ok[std::size_t(i)]) {
      if (lo < 0) lo = i;
    } else if (lo >= 0) {
      if (i - lo > best_len) {
        best_len = i - lo;
        best_lo = lo;
      }
      lo = -1;
    }
  }
  if (best_len < 2) {
    fit.flag = MixingFit::Flag::BelowNoise;
    return fit;
  }
  fit.window_lo = best_lo;
  fit.window_hi = best_lo + best_len - 1;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = fit.window_lo; i <= fit.window_hi; ++i) {
    const double y = std::log(std::abs(series.values[std::size_t(i)]));
    sx += i;
    sy += y;
    sxx += double(i) * i;
    sxy += i * y;
  }
  const double count = best_len;
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / count;
  for (int i = fit.window_lo; i <= fit.window_hi; ++i)
    fit.residual = std::max(
        fit.residual, std::fabs(std::log(std::abs(series.values[std::size_t(i)])) -
                                (slope * i + intercept)));
  fit.theta_hat = std::exp(slope);
  fit.flag = fit.theta_hat >= 1.0 - 1e-6 ? MixingFit::Flag::NoDecay
                                         : MixingFit::Flag::Ok;
  return fit;
}

TripleResult triple_correlation_operator(const FourierOperator& op,
                                         const Observable& phi0,
                                         const Observable& phi1,
                                         const Observable& phi2, int n1,
                                         int n2) {
  if (n1 < 0 || n2 < n1) throw ConfigError("need 0 <= n1 <= n2");
  const ModeBox& box = op.box;
  CVec c = embed(phi2, box);
  for (int i = 0; i < n2 - n1; ++i) c = op.apply(c);

  // Multiplication by phi1 is a mode-space convolution; any product mode
  // pushed off the box means the truncated algebra cannot represent it.
  CVec conv = CVec::Zero(box.size());
  for (std::int64_t idx = 0; idx < box.size(); ++idx) {
    if (std::abs(c[idx]) < 1e-300) continue;
    const Mode k = box.mode_of(idx);
    for (const auto& [k1, coef] : phi1.coeffs) {
      Mode target = k;
      for (int i = 0; i < box.d; ++i) target[std::size_t(i)] += k1[std::size_t(i)];
      if (!box.contains(target))
        throw BudgetError(
            "mode convolution leaves the operator box; enlarge K or use the "
            "Monte Carlo route");
      conv[box.index_of(target)] += coef * c[idx];
    }
  }
  c = std::move(conv);
  for (int i = 0; i < n1; ++i) c = op.apply(c);

  TripleResult out;
  for (const auto& [k0, coef] : phi0.coeffs) {
    const Mode nk = negate(k0);
    if (box.contains(nk)) out.value += coef * c[box.index_of(nk)];
  }
  return out;
}

TripleResult triple_correlation_mc(const Model& model, const DrivingMeasure& mu,
                                   const Observable& phi0,
                                   const Observable& phi1,
                                   const Observable& phi2, int n1, int n2,
                                   std::int64_t samples, std::uint64_t seed,
                                   Exec exec) {
  if (n1 < 0 || n2 < n1) throw ConfigError("need 0 <= n1 <= n2");
  if (samples < 2) throw ConfigError("need at least 2 samples");
  std::vector<Complex> vals(static_cast<std::size_t>(samples));
  for_each_index(samples, exec, [&](std::int64_t t) {
    const std::uint64_t trial_seed = split_seed(seed, std::uint64_t(t));
    Complex p0, p1;
    run_orbit(model, mu, trial_seed, n2, [&](std::int64_t n, const TorusPoint& x) {
      if (n == 0) p0 = phi0.eval(x);
      if (n == n1) p1 = phi1.eval(x);
      if (n == n2) vals[std::size_t(t)] = p0 * p1 * phi2.eval(x);
    });
  });
  std::vector<double> re(static_cast<std::size_t>(samples)), im(static_cast<std::size_t>(samples));
  for (std::int64_t t = 0; t < samples; ++t) {
    re[std::size_t(t)] = vals[std::size_t(t)].real();
    im[std::size_t(t)] = vals[std::size_t(t)].imag();
  }
  const MeanStderr mre = mean_stderr(re);
  const MeanStderr mim = mean_stderr(im);
  TripleResult out;
  out.value = Complex(mre.mean, mim.mean);
  out.stderr_ = std::hypot(mre.stderr_, mim.stderr_);
  return out;
}

GreenKuboReport green_kubo_variance(const FourierOperator& op,
                                    const Observable& phi, int n_max) {
  if (!phi.zero_mean()) throw ConfigError("observable must have zero mean");
  if (!phi.real_valued()) throw ConfigError("observable must be real-valued");
  GreenKuboReport rep;
  rep.n_max = n_max;
  rep.series = correlation_series_operator(op, phi, phi, n_max);
  rep.fit = mixing_rate_fit(rep.series);

  std::vector<double> terms;
  for (int n = 1; n <= n_max; ++n)
    terms.push_back(rep.series.values[std::size_t(n)].real());
  rep.partial_sum = phi.l2_norm2() + 2.0 * pairwise_sum(terms);

  if (rep.fit.flag != MixingFit::Flag::Ok) {
    rep.available = false;
    rep.diagnostic =
        rep.fit.flag == MixingFit::Flag::NoDecay
            ? "correlation series does not decay; no summable variance"
            : "correlation series below noise; rate not identifiable";
    return rep;
  }
  const double theta = rep.fit.theta_hat;
  const double last = std::abs(rep.series.values[std::size_t(n_max)]);
  rep.tail_bound = 2.0 * last * theta / (1.0 - theta);
  if (rep.partial_sum < -rep.tail_bound) {
    rep.available = false;
    rep.diagnostic = "partial sum negative beyond the tail bound";
    return rep;
  }
  rep.sigma2 = std::max(0.0, rep.partial_sum);
  rep.available = true;
  return rep;
}

double ks_distance_gaussian(std::vector<double> samples, double sigma2) {
  if (samples.empty()) throw ConfigError("no samples");
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  const double sigma = std::sqrt(std::max(sigma2, 0.0));
  double dist = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    const double f =
        sigma > 0.0 ? 0.5 * std::erfc(-x / (sigma * std::numbers::sqrt2))
                    : (x >= 0.0 ? 1.0 : 0.0);
    dist = std::max(dist, std::fabs(f - double(i + 1) / n));
    dist = std::max(dist, std::fabs(f - double(i) / n));
  }
  return dist;
}

namespace {

std::vector<double> normalized_sums(const Model& model,
                                    const DrivingMeasure& mu,
                                    const Observable& phi, std::int64_t N,
                                    std::int64_t trials, std::uint64_t seed,
                                    Exec exec) {
  std::vector<double> sums(static_cast<std::size_t>(trials));
  const double inv_sqrt = 1.0 / std::sqrt(double(N));
  for_each_index(trials, exec, [&](std::int64_t t) {
    const std::uint64_t trial_seed = split_seed(seed, std::uint64_t(t));
    double acc = 0.0;
    run_orbit(model, mu, trial_seed, N - 1,
              [&](std::int64_t, const TorusPoint& x) {
                acc += phi.eval_real(x);
              });
    sums[std::size_t(t)] = acc * inv_sqrt;
  });
  return sums;
}

}  // namespace

CLTReport clt_experiment(const Model& model, const DrivingMeasure& mu,
                         const Observable& phi, std::int64_t N,
                         std::int64_t trials, std::uint64_t seed,
                         const GreenKuboReport& gk, Exec exec) {
  if (N < 100) throw ConfigError("N must be at least 100");
  if (trials < 1000) throw ConfigError("need at least 1000 trials");
  if (!phi.real_valued()) throw ConfigError("observable must be real-valued");

  CLTReport rep;
  rep.N = N;
  rep.trials = trials;
  rep.sigma2_gk = gk.sigma2;
  rep.gk_available = gk.available;

  const std::vector<double> sums =
      normalized_sums(model, mu, phi, N, trials, seed, exec);

  double max_abs = 0.0;
  for (const double s : sums) max_abs = std::max(max_abs, std::fabs(s));
  if (max_abs < 1e-12) {
    rep.degenerate_zero = true;
    rep.sigma2_mc = 0.0;
    rep.ks_distance = 0.0;
    rep.diagnostic = "all normalized sums vanish (zero-variance branch)";
    return rep;
  }

  const MeanStderr ms = mean_stderr(sums);
  std::vector<double> sq(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const double d = sums[i] - ms.mean;
    sq[i] = d * d;
  }
  rep.sigma2_mc = pairwise_sum(sq) / double(sums.size() - 1);

  double ref = gk.sigma2;
  if (!gk.available) {
    ref = rep.sigma2_mc;
    rep.used_empirical_variance = true;
    rep.diagnostic =
        "Green-Kubo variance unavailable (" + gk.diagnostic +
        "); KS computed against the empirical-variance Gaussian";
  }
  rep.ks_distance = ks_distance_gaussian(sums, ref);
  return rep;
}

double mann_kendall_increasing_p(const std::vector<double>& values) {
  const int n = int(values.size());
  if (n < 2) return 1.0;
  const auto statistic = [](const std::vector<double>& v) {
    int s = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        if (v[j] > v[i]) ++s;
        if (v[j] < v[i]) --s;
      }
    return s;
  };
  const int s_obs = statistic(values);

  if (n <= 8) {
    // Exact permutation null.
    std::vector<double> perm(values);
    std::sort(perm.begin(), perm.end());
    int total = 0, at_least = 0;
    do {
      ++total;
      if (statistic(perm) >= s_obs) ++at_least;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return double(at_least) / double(total);
  }
  // Normal approximation with the usual variance (no ties assumed).
  const double var = double(n) * (n - 1) * (2 * n + 5) / 18.0;
  const double z = (s_obs - 1.0) / std::sqrt(var);
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

BerryEsseenReport berry_esseen_scaling(const Model& model,
                                       const DrivingMeasure& mu,
                                       const Observable& phi,
                                       const std::vector<std::int64_t>& N_list,
                                       std::int64_t trials, std::uint64_t seed,
                                       const GreenKuboReport& gk, Exec exec) {
  if (N_list.empty()) throw ConfigError("empty N list");
  for (std::size_t i = 0; i + 1 < N_list.size(); ++i)
    if (N_list[i + 1] <= N_list[i])
      throw ConfigError("N list must be increasing");
  if (!gk.available || !(gk.sigma2 > 0.0))
    throw ConfigError("scaling study needs a positive Green-Kubo variance");

  BerryEsseenReport rep;
  std::vector<double> scaled;
  for (std::size_t i = 0; i < N_list.size(); ++i) {
    const std::int64_t N = N_list[i];
    const auto sums = normalized_sums(model, mu, phi, N, trials,
                                      split_seed(seed, std::uint64_t(i)), exec);
    BerryEsseenRow row;
    row.N = N;
    row.ks = ks_distance_gaussian(sums, gk.sigma2);
    row.sqrtN_ks = std::sqrt(double(N)) * row.ks;
    rep.max_sqrtN_ks = std::max(rep.max_sqrtN_ks, row.sqrtN_ks);
    scaled.push_back(row.sqrtN_ks);
    rep.rows.push_back(row);
  }
  if (rep.rows.size() >= 2) {
    rep.mk_p_value = mann_kendall_increasing_p(scaled);
    rep.increasing_trend = rep.mk_p_value <= 0.05;
  }
  return rep;
}

}  // namespace rdsl
