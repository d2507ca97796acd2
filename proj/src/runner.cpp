#include "rdsl/runner.hpp"

#include "rdsl/cocycle.hpp"
#include "rdsl/rng.hpp"
#include "rdsl/spectral.hpp"
#include "rdsl/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace rdsl {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config error at " + (path.empty() ? "$" : path) + ": " +
                    msg);
}

void require_keys(const Json& j, const std::set<std::string>& allowed,
                  const std::string& path) {
  if (!j.is_object()) config_fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      config_fail(path, "unknown key '" + key + "'");
  }
}

const Json& require(const Json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) config_fail(path, std::string("missing key '") + key + "'");
  return j.at(key);
}

double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  return j.get<double>();
}

std::int64_t get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

Mat parse_matrix(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_fail(path, "expected a matrix (array of rows)");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) config_fail(path, "matrix rows must be nonempty arrays");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      config_fail(path, "ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(Eigen::Index(r), Eigen::Index(c)) = get_number(j[r][c], path);
  }
  return m;
}

Vec parse_vector(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_fail(path, "expected a vector");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[Eigen::Index(i)] = get_number(j[i], path);
  return v;
}

Mode parse_mode(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_fail(path, "expected a mode (array of integers)");
  Mode k;
  for (const auto& c : j) k.push_back(get_int(c, path));
  return k;
}

std::vector<Mode> parse_modes(const Json& j, const std::string& path) {
  if (!j.is_array()) config_fail(path, "expected an array of modes");
  std::vector<Mode> out;
  for (const auto& m : j) out.push_back(parse_mode(m, path));
  return out;
}

MapTransform parse_transform(const Json& j, const std::string& path) {
  const std::string s = j.get<std::string>();
  if (s == "identity") return MapTransform::Identity;
  if (s == "inverse") return MapTransform::Inverse;
  if (s == "transpose") return MapTransform::Transpose;
  if (s == "inverse-transpose") return MapTransform::InverseTranspose;
  config_fail(path, "unknown transform '" + s + "'");
}

Observable parse_observable(const Json& j, int d, const std::string& path) {
  require_keys(j, {"cos_mode", "amplitude", "coeffs"}, path);
  Observable phi;
  phi.d = d;
  if (j.contains("cos_mode")) {
    const Mode k = parse_mode(j.at("cos_mode"), path + ".cos_mode");
    if (int(k.size()) != d) config_fail(path, "cos_mode dimension mismatch");
    const double amp =
        j.contains("amplitude") ? get_number(j.at("amplitude"), path) : 1.0;
    return Observable::cosine(k, amp);
  }
  if (!j.contains("coeffs")) config_fail(path, "observable needs cos_mode or coeffs");
  for (const auto& c : j.at("coeffs")) {
    require_keys(c, {"k", "re", "im"}, path + ".coeffs[]");
    const Mode k = parse_mode(require(c, "k", path), path);
    if (int(k.size()) != d) config_fail(path, "coefficient mode dimension mismatch");
    const double re = c.contains("re") ? get_number(c.at("re"), path) : 0.0;
    const double im = c.contains("im") ? get_number(c.at("im"), path) : 0.0;
    phi.coeffs.push_back({k, Complex(re, im)});
  }
  return phi;
}

}  // namespace

Model parse_model(const Json& j, const std::string& path) {
  require_keys(j,
               {"variant", "dimension", "matrices", "offsets", "weights", "tau",
                "kick_strength", "noise_halfwidth", "block_shear", "base",
                "copies", "max_dimension"},
               path);
  ModelConfig cfg;
  const std::string variant = require(j, "variant", path).get<std::string>();
  if (variant == "affine-torus")
    cfg.variant = ModelVariant::AffineTorus;
  else if (variant == "pierrehumbert")
    cfg.variant = ModelVariant::Pierrehumbert;
  else if (variant == "standard-map")
    cfg.variant = ModelVariant::StandardMap;
  else if (variant == "linear-cocycle")
    cfg.variant = ModelVariant::LinearCocycle;
  else if (variant == "product-lift")
    cfg.variant = ModelVariant::ProductLift;
  else
    config_fail(path, "unknown model variant '" + variant + "'");

  if (j.contains("dimension"))
    cfg.dimension = int(get_int(j.at("dimension"), path + ".dimension"));
  if (j.contains("matrices"))
    for (const auto& m : j.at("matrices"))
      cfg.matrices.push_back(parse_matrix(m, path + ".matrices[]"));
  if (j.contains("offsets"))
    for (const auto& b : j.at("offsets"))
      cfg.offsets.push_back(parse_vector(b, path + ".offsets[]"));
  if (j.contains("weights"))
    for (const auto& w : j.at("weights"))
      cfg.weights.push_back(get_number(w, path + ".weights[]"));
  if (j.contains("tau")) cfg.tau = get_number(j.at("tau"), path + ".tau");
  if (j.contains("kick_strength"))
    cfg.kick_strength = get_number(j.at("kick_strength"), path);
  if (j.contains("noise_halfwidth"))
    cfg.noise_halfwidth = get_number(j.at("noise_halfwidth"), path);
  if (j.contains("block_shear")) {
    const Json& bs = j.at("block_shear");
    require_keys(bs, {"base", "power", "shear_strength"}, path + ".block_shear");
    BlockShearSpec spec;
    for (const auto& b : require(bs, "base", path))
      spec.base.push_back(parse_matrix(b, path + ".block_shear.base[]"));
    spec.power = int(get_int(require(bs, "power", path), path));
    if (bs.contains("shear_strength"))
      spec.shear_strength = get_number(bs.at("shear_strength"), path);
    cfg.block_shear = std::move(spec);
  }
  if (j.contains("base")) {
    cfg.base = std::make_shared<ModelConfig>();
    // Parse recursively through a temporary model build below.
  }
  if (j.contains("copies"))
    cfg.copies = int(get_int(j.at("copies"), path + ".copies"));
  if (j.contains("max_dimension"))
    cfg.max_dimension = int(get_int(j.at("max_dimension"), path));

  if (cfg.variant == ModelVariant::ProductLift) {
    const Model base = parse_model(require(j, "base", path), path + ".base");
    if (base.dimension() * cfg.copies > cfg.max_dimension)
      config_fail(path, "product dimension exceeds max_dimension");
    return lift_product(base, cfg.copies);
  }
  return build_model(cfg);
}

DrivingMeasure parse_measure(const Json& j, const Model& model,
                             const std::string& path) {
  require_keys(j,
               {"kind", "atoms", "map_id", "phase_period", "factors",
                "transform"},
               path);
  const std::string kind = require(j, "kind", path).get<std::string>();
  DrivingMeasure mu;
  if (kind == "model-default") {
    mu = model.default_measure();
  } else if (kind == "finite-atoms") {
    std::vector<MapAtom> atoms;
    for (const auto& a : require(j, "atoms", path)) {
      require_keys(a, {"map_id", "weight", "phase"}, path + ".atoms[]");
      MapAtom atom;
      atom.map_id = int(get_int(require(a, "map_id", path), path));
      atom.weight = get_number(require(a, "weight", path), path);
      if (a.contains("phase")) atom.phase = get_number(a.at("phase"), path);
      if (atom.map_id < 0 || atom.map_id >= model.map_count())
        config_fail(path, "atom map_id out of range");
      if (atom.phase.has_value() != model.parametric(atom.map_id))
        config_fail(path,
                    "phase must be present exactly for parametric families");
      atoms.push_back(atom);
    }
    mu = DrivingMeasure::finite(std::move(atoms));
  } else if (kind == "parametric-uniform-phase") {
    const int id = int(get_int(require(j, "map_id", path), path));
    if (id < 0 || id >= model.map_count())
      config_fail(path, "map_id out of range");
    if (!model.parametric(id))
      config_fail(path, "map_id does not name a parametric family");
    const double period = j.contains("phase_period")
                              ? get_number(j.at("phase_period"), path)
                              : model.phase_period(id);
    mu = DrivingMeasure::uniform_phase(id, period);
  } else if (kind == "convolution") {
    std::vector<DrivingMeasure> factors;
    for (const auto& f : require(j, "factors", path))
      factors.push_back(parse_measure(f, model, path + ".factors[]"));
    mu = DrivingMeasure::convolution(std::move(factors));
  } else {
    config_fail(path, "unknown measure kind '" + kind + "'");
  }
  if (j.contains("transform"))
    mu = transform_measure(mu, parse_transform(j.at("transform"), path), &model);
  return mu;
}

ExperimentContext parse_config(const Json& config) {
  require_keys(config,
               {"model", "measure", "experiment", "parameters", "seed",
                "budgets"},
               "$");
  ExperimentContext ctx;
  ctx.model = parse_model(require(config, "model", "$"), "$.model");
  ctx.measure = config.contains("measure")
                    ? parse_measure(config.at("measure"), ctx.model, "$.measure")
                    : ctx.model.default_measure();
  ctx.experiment = require(config, "experiment", "$").get<std::string>();
  ctx.parameters = config.contains("parameters") ? config.at("parameters")
                                                 : Json::object();
  ctx.seed = config.contains("seed")
                 ? std::uint64_t(get_int(config.at("seed"), "$.seed"))
                 : 0;
  if (config.contains("budgets")) {
    const Json& b = config.at("budgets");
    require_keys(b, {"word_cap", "mc_words"}, "$.budgets");
    if (b.contains("word_cap"))
      ctx.budget.word_cap = get_int(b.at("word_cap"), "$.budgets.word_cap");
    if (b.contains("mc_words"))
      ctx.budget.mc_words = get_int(b.at("mc_words"), "$.budgets.mc_words");
  }
  ctx.config_echo = config;
  ctx.config_hash = fnv1a(config.dump());
  return ctx;
}

// ---------------------------------------------------------------------------
// Experiment dispatch.

namespace {

struct CsvBuilder {
  std::ostringstream os;

  CsvBuilder(std::uint64_t config_hash, std::uint64_t seed) {
    char head[64];
    std::snprintf(head, sizeof(head), "# config_hash=%016llx seed=%llu\n",
                  static_cast<unsigned long long>(config_hash),
                  static_cast<unsigned long long>(seed));
    os << head;
  }
  void header(const std::string& h) { os << h << "\n"; }
  template <class... Ts>
  void row(Ts... cells) {
    bool first = true;
    (
        [&] {
          if (!first) os << ",";
          first = false;
          cell(cells);
        }(),
        ...);
    os << "\n";
  }
  void cell(double v) { os << format_double(v); }
  void cell(int v) { os << v; }
  void cell(std::int64_t v) { os << v; }
  void cell(const std::string& v) { os << v; }
  void cell(const char* v) { os << v; }
  std::string str() const { return os.str(); }
};

Json witness_json(const Witness& w) {
  Json j;
  j["base"] = std::vector<double>(w.base.coords().data(),
                                  w.base.coords().data() + w.base.coords().size());
  Json frame = Json::array();
  for (Eigen::Index c = 0; c < w.frame.cols(); ++c) {
    Json col = Json::array();
    for (Eigen::Index r = 0; r < w.frame.rows(); ++r) col.push_back(w.frame(r, c));
    frame.push_back(col);
  }
  j["frame"] = frame;
  return j;
}

Json estimate_json(const ExpansionEstimate& est) {
  Json j;
  j["value_per_step"] = est.value;
  j["stderr"] = est.stderr_;
  j["samples"] = est.samples;
  j["steps"] = est.steps;
  j["mode"] = est.mode == EstimateMode::ExactEnumeration ? "exact-enumeration"
                                                         : "monte-carlo";
  j["fell_back_to_monte_carlo"] = est.fell_back_to_monte_carlo;
  j["witness"] = witness_json(est.witness);
  return j;
}

TorusPoint parse_point(const Json& j, int d, const std::string& path) {
  const Vec v = parse_vector(j, path);
  if (int(v.size()) != d) config_fail(path, "point dimension mismatch");
  return TorusPoint(v);
}

struct ExperimentResult {
  Json results;
  std::vector<std::string> warnings;
  std::string csv;
  std::string csv_name = "table.csv";
};

ExperimentResult run_expansion(const ExperimentContext& ctx, Exec exec) {
  const Json& p = ctx.parameters;
  require_keys(p,
               {"type", "N", "frame", "cocycle", "search", "k"},
               "$.parameters");
  const std::string type = require(p, "type", "$.parameters").get<std::string>();
  const int N = int(get_int(require(p, "N", "$.parameters"), "$.parameters.N"));
  const int d = ctx.model.dimension();

  ExpansionEstimate est;
  if (type == "infimum") {
    CocycleKind kind = CocycleKind::Cotangent;
    if (p.contains("cocycle")) {
      const std::string c = p.at("cocycle").get<std::string>();
      if (c == "tangent")
        kind = CocycleKind::Tangent;
      else if (c != "cotangent")
        config_fail("$.parameters.cocycle", "expected tangent or cotangent");
    }
    SearchPlan plan;
    if (p.contains("search")) {
      const Json& s = p.at("search");
      require_keys(s,
                   {"base_points_per_dim", "directions", "refine_rounds",
                    "initial_step"},
                   "$.parameters.search");
      if (s.contains("base_points_per_dim"))
        plan.base_points_per_dim = int(get_int(s.at("base_points_per_dim"), "$"));
      if (s.contains("directions"))
        plan.directions = int(get_int(s.at("directions"), "$"));
      if (s.contains("refine_rounds"))
        plan.refine_rounds = int(get_int(s.at("refine_rounds"), "$"));
      if (s.contains("initial_step"))
        plan.initial_step = get_number(s.at("initial_step"), "$");
    }
    est = expansion_lambda(ctx.model, ctx.measure, N, kind, plan, ctx.budget,
                           ctx.seed, exec);
  } else {
    const Json& fr = require(p, "frame", "$.parameters");
    require_keys(fr, {"base", "covector", "vector", "basis"},
                 "$.parameters.frame");
    const TorusPoint base =
        fr.contains("base")
            ? parse_point(fr.at("base"), d, "$.parameters.frame.base")
            : TorusPoint::zero(d);
    if (type == "cotangent") {
      Vec xi = parse_vector(require(fr, "covector", "$.parameters.frame"),
                            "$.parameters.frame.covector");
      xi /= xi.norm();
      est = cotangent_expansion(ctx.model, ctx.measure, N,
                                CotangentFrame{base, xi}, ctx.budget, ctx.seed,
                                exec);
    } else if (type == "tangent") {
      Vec v = parse_vector(require(fr, "vector", "$.parameters.frame"),
                           "$.parameters.frame.vector");
      v /= v.norm();
      est = tangent_expansion(ctx.model, ctx.measure, N, base, v, ctx.budget,
                              ctx.seed, exec);
    } else if (type == "kplane") {
      Mat basis = parse_matrix(require(fr, "basis", "$.parameters.frame"),
                               "$.parameters.frame.basis");
      Eigen::HouseholderQR<Mat> qr(basis);
      basis = qr.householderQ() * Mat::Identity(d, basis.cols());
      est = kplane_expansion(ctx.model, ctx.measure, N,
                             PlaneFrame{base, basis}, ctx.budget, ctx.seed,
                             exec);
    } else {
      config_fail("$.parameters.type",
                  "expected cotangent, tangent, kplane, or infimum");
    }
  }

  ExperimentResult out;
  out.results = estimate_json(est);
  if (est.fell_back_to_monte_carlo)
    out.warnings.push_back("exact enumeration over budget; fell back to Monte Carlo");
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("value_per_step,stderr,samples,steps,mode");
  csv.row(est.value, est.stderr_, est.samples, est.steps,
          est.mode == EstimateMode::ExactEnumeration ? "exact" : "mc");
  out.csv = csv.str();
  return out;
}

ExperimentResult run_lyapunov(const ExperimentContext& ctx, Exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"T", "x0", "reorth_period"}, "$.parameters");
  const std::int64_t T = get_int(require(p, "T", "$.parameters"), "$.parameters.T");
  const int d = ctx.model.dimension();
  const TorusPoint x0 = p.contains("x0")
                            ? parse_point(p.at("x0"), d, "$.parameters.x0")
                            : TorusPoint::zero(d);
  const int period = p.contains("reorth_period")
                         ? int(get_int(p.at("reorth_period"), "$"))
                         : 1;
  const LyapunovReport rep =
      lyapunov_spectrum(ctx.model, ctx.measure, T, x0, ctx.seed, period);

  ExperimentResult out;
  out.results["exponents"] = std::vector<double>(
      rep.exponents.data(), rep.exponents.data() + rep.exponents.size());
  out.results["confidence"] = std::vector<double>(
      rep.confidence.data(), rep.confidence.data() + rep.confidence.size());
  out.results["orbit_length"] = rep.orbit_length;
  out.results["reorth_period"] = rep.reorth_period;
  out.results["sum_of_exponents"] = rep.exponents.sum();
  if (rep.retried) out.warnings.push_back("re-orthonormalization period decreased after blow-up");
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("index,exponent,confidence");
  for (int i = 0; i < d; ++i) csv.row(i, rep.exponents[i], rep.confidence[i]);
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

SpectrumOptions parse_spectrum_options(const Json& p) {
  SpectrumOptions opts;
  if (p.contains("dense_limit"))
    opts.dense_limit = get_int(p.at("dense_limit"), "$.parameters.dense_limit");
  if (p.contains("block")) opts.block = int(get_int(p.at("block"), "$"));
  if (p.contains("iters")) opts.iters = int(get_int(p.at("iters"), "$"));
  return opts;
}

Json spectral_report_json(const SpectralReport& rep, std::size_t cap = 2048) {
  Json j;
  Json eig = Json::array();
  for (std::size_t i = 0; i < rep.eigenvalues.size() && i < cap; ++i) {
    eig.push_back(
        {{"re", rep.eigenvalues[i].real()}, {"im", rep.eigenvalues[i].imag()}});
  }
  j["eigenvalues"] = eig;
  j["eigenvalue_count"] = rep.eigenvalues.size();
  j["full_spectrum"] = rep.full_spectrum;
  j["subleading_modulus"] = rep.subleading_modulus;
  j["subleading"] = {{"re", rep.subleading.real()}, {"im", rep.subleading.imag()}};
  j["unit_multiplicity"] = rep.unit_multiplicity;
  j["fixed_mode_count"] = rep.fixed_mode_count;
  j["weak_mixing_pass"] = rep.weak_mixing_pass;
  j["diagnostic"] = rep.diagnostic;
  return j;
}

ExperimentResult run_spectrum(const ExperimentContext& ctx, Exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"K", "K_list", "s", "dense_limit", "block", "iters"},
               "$.parameters");
  const double s = p.contains("s") ? get_number(p.at("s"), "$.parameters.s") : 0.0;
  const SpectrumOptions opts = parse_spectrum_options(p);

  std::vector<int> K_list;
  if (p.contains("K_list"))
    for (const auto& k : p.at("K_list"))
      K_list.push_back(int(get_int(k, "$.parameters.K_list")));
  else
    K_list.push_back(int(get_int(require(p, "K", "$.parameters"), "$.parameters.K")));

  ExperimentResult out;
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("K,subleading_modulus,unit_multiplicity,weak_mixing_pass,max_truncation_loss");
  Json sweeps = Json::array();
  double prev = -1.0;
  bool cauchy = true;
  for (std::size_t i = 0; i < K_list.size(); ++i) {
    const int K = K_list[i];
    const FourierOperator op = build_galerkin(ctx.model, ctx.measure, K, s);
    const SpectralReport rep = operator_spectrum(op, s, opts);
    Json entry = spectral_report_json(rep);
    entry["K"] = K;
    entry["max_truncation_loss"] = op.max_truncation_loss();
    if (op.max_truncation_loss() > 1e-3)
      out.warnings.push_back("max column truncation loss " +
                             format_double(op.max_truncation_loss()) + " at K=" +
                             std::to_string(K));
    csv.row(K, rep.subleading_modulus, rep.unit_multiplicity,
            rep.weak_mixing_pass ? 1 : 0, op.max_truncation_loss());
    if (i > 0 && std::fabs(rep.subleading_modulus - prev) > 1e-6) cauchy = false;
    prev = rep.subleading_modulus;
    sweeps.push_back(std::move(entry));
  }
  if (K_list.size() > 1) {
    out.results["K_sweep"] = sweeps;
    out.results["subleading_cauchy_at_1e-6"] = cauchy;
    if (!cauchy)
      out.warnings.push_back("subleading eigenvalue not settled across the K sweep");
  } else {
    out.results = sweeps[0];
  }
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

ExperimentResult run_essential_radius(const ExperimentContext& ctx, Exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"s", "r", "n_max", "probes"}, "$.parameters");
  const double s = get_number(require(p, "s", "$.parameters"), "$.parameters.s");
  const double r = get_number(require(p, "r", "$.parameters"), "$.parameters.r");
  const int n_max = int(get_int(require(p, "n_max", "$.parameters"), "$"));
  const auto probes = parse_modes(require(p, "probes", "$.parameters"),
                                  "$.parameters.probes");
  const EssentialRadiusReport rep = essential_radius_estimate(
      ctx.model, ctx.measure, s, r, n_max, probes, ctx.budget, ctx.seed);

  ExperimentResult out;
  out.results["eta_hat"] = rep.eta_hat;
  out.results["slope"] = rep.slope;
  out.results["fit_residual"] = rep.fit_residual;
  out.results["window"] = {rep.window_lo, rep.window_hi};
  out.results["gapless"] = rep.gapless;
  out.results["s"] = rep.s;
  if (rep.gapless) out.warnings.push_back("no high-frequency decay: gapless");
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("n,rho_max,lemma_lhs");
  for (int n = 1; n <= n_max; ++n)
    csv.row(n, rep.rho_max[n - 1], rep.lemma_lhs[n - 1]);
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

ExperimentResult run_lasota_yorke(const ExperimentContext& ctx, Exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"s", "s_bar", "n_list", "probes"}, "$.parameters");
  const double s = get_number(require(p, "s", "$.parameters"), "$.parameters.s");
  const double s_bar =
      get_number(require(p, "s_bar", "$.parameters"), "$.parameters.s_bar");
  std::vector<int> n_list;
  for (const auto& n : require(p, "n_list", "$.parameters"))
    n_list.push_back(int(get_int(n, "$.parameters.n_list")));
  const auto probes = parse_modes(require(p, "probes", "$.parameters"),
                                  "$.parameters.probes");
  const LasotaYorkeReport rep = lasota_yorke_fit(
      ctx.model, ctx.measure, s, s_bar, n_list, probes, ctx.budget, ctx.seed);

  ExperimentResult out;
  out.results["eta"] = rep.eta;
  out.results["feasible"] = rep.feasible;
  out.results["gapless"] = rep.gapless;
  out.results["C_n"] = rep.C_n;
  out.results["n_list"] = rep.n_list;
  out.results["max_growth_ratio"] = rep.max_growth_ratio;
  if (rep.gapless)
    out.warnings.push_back("gapless: inequality only holds with eta = 1");
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("n,C_n");
  for (std::size_t i = 0; i < n_list.size(); ++i)
    csv.row(n_list[i], rep.C_n[i]);
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

ExperimentResult run_stability(const ExperimentContext& ctx, Exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"family", "Q_list", "K", "s", "dense_limit", "block", "iters"},
               "$.parameters");
  const std::string family =
      require(p, "family", "$.parameters").get<std::string>();
  if (family != "pierrehumbert-phase")
    config_fail("$.parameters.family", "unknown family '" + family + "'");
  if (ctx.model.variant() != ModelVariant::Pierrehumbert)
    config_fail("$.parameters.family",
                "pierrehumbert-phase family needs the alternating-shear model");
  const int K = int(get_int(require(p, "K", "$.parameters"), "$.parameters.K"));
  const double s = p.contains("s") ? get_number(p.at("s"), "$") : 0.0;
  SpectrumOptions opts = parse_spectrum_options(p);
  if (!p.contains("dense_limit")) opts.dense_limit = 400;  // prefer Ritz here

  std::vector<StabilityMember> members;
  for (const auto& q : require(p, "Q_list", "$.parameters")) {
    const int Q = int(get_int(q, "$.parameters.Q_list"));
    members.push_back(StabilityMember{"Q=" + std::to_string(Q), ctx.model,
                                      pierrehumbert_discrete_phases(Q)});
  }
  const auto points =
      stability_sweep(ctx.model, ctx.measure, members, K, s, opts);

  ExperimentResult out;
  Json rows = Json::array();
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("label,subleading_modulus,deviation,dd,max_truncation_loss");
  double max_dev = 0.0;
  for (const auto& pt : points) {
    Json r;
    r["label"] = pt.label;
    r["subleading_modulus"] = pt.subleading_modulus;
    r["subleading"] = {{"re", pt.subleading.real()}, {"im", pt.subleading.imag()}};
    r["deviation"] = pt.deviation;
    if (pt.dd) r["dd"] = *pt.dd;
    r["max_truncation_loss"] = pt.max_truncation_loss;
    rows.push_back(r);
    max_dev = std::max(max_dev, pt.deviation);
    csv.row(pt.label, pt.subleading_modulus, pt.deviation,
            pt.dd ? format_double(*pt.dd) : std::string("nan"),
            pt.max_truncation_loss);
  }
  out.results["points"] = rows;
  out.results["max_deviation"] = max_dev;
  out.results["final_deviation"] =
      points.empty() ? 0.0 : points.back().deviation;
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

ExperimentResult run_correlation(const ExperimentContext& ctx, Exec exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"phi", "psi", "n_max", "method", "K", "samples"},
               "$.parameters");
  const int d = ctx.model.dimension();
  const Observable phi =
      parse_observable(require(p, "phi", "$.parameters"), d, "$.parameters.phi");
  const Observable psi = p.contains("psi")
                             ? parse_observable(p.at("psi"), d, "$.parameters.psi")
                             : phi;
  const int n_max = int(get_int(require(p, "n_max", "$.parameters"), "$"));
  const std::string method =
      p.contains("method") ? p.at("method").get<std::string>() : "both";

  std::optional<CorrelationSeries> op_series, mc_series;
  if (method == "operator" || method == "both") {
    const int K = p.contains("K")
                      ? int(get_int(p.at("K"), "$"))
                      : std::max(phi.max_abs_mode(), psi.max_abs_mode()) + 1;
    const FourierOperator op = build_galerkin(ctx.model, ctx.measure, K, 0.0);
    op_series = correlation_series_operator(op, phi, psi, n_max);
  }
  if (method == "monte-carlo" || method == "both") {
    const std::int64_t samples = p.contains("samples")
                                     ? get_int(p.at("samples"), "$")
                                     : ctx.budget.mc_words;
    mc_series = correlation_series_mc(ctx.model, ctx.measure, phi, psi, n_max,
                                      samples, ctx.seed, exec);
  }
  if (method != "operator" && method != "monte-carlo" && method != "both")
    config_fail("$.parameters.method", "expected operator, monte-carlo, or both");

  ExperimentResult out;
  const CorrelationSeries& primary = op_series ? *op_series : *mc_series;
  const MixingFit fit = mixing_rate_fit(primary);
  out.results["theta_hat"] = fit.theta_hat;
  out.results["fit_flag"] = fit.flag == MixingFit::Flag::Ok ? "ok"
                            : fit.flag == MixingFit::Flag::NoDecay
                                ? "no-decay"
                                : "below-noise";
  out.results["fit_window"] = {fit.window_lo, fit.window_hi};
  out.results["fit_residual"] = fit.residual;
  if (fit.flag != MixingFit::Flag::Ok)
    out.warnings.push_back(fit.flag == MixingFit::Flag::NoDecay
                               ? "series does not decay"
                               : "series below noise floor");

  CsvBuilder csv(ctx.config_hash, ctx.seed);
  std::string header = "n";
  if (op_series) header += ",op_re,op_im";
  if (mc_series) header += ",mc_re,mc_im,mc_stderr";
  csv.header(header);
  for (int n = 0; n <= n_max; ++n) {
    csv.os << n;
    if (op_series)
      csv.os << "," << format_double(op_series->values[std::size_t(n)].real())
             << "," << format_double(op_series->values[std::size_t(n)].imag());
    if (mc_series)
      csv.os << "," << format_double(mc_series->values[std::size_t(n)].real())
             << "," << format_double(mc_series->values[std::size_t(n)].imag())
             << "," << format_double(mc_series->stderrs[std::size_t(n)]);
    csv.os << "\n";
  }
  if (op_series && mc_series) {
    int agree = 0;
    for (int n = 0; n <= n_max; ++n) {
      const double diff = std::abs(op_series->values[std::size_t(n)] -
                                   mc_series->values[std::size_t(n)]);
      if (diff <= 3.0 * mc_series->stderrs[std::size_t(n)] + 1e-13) ++agree;
    }
    out.results["op_mc_agree_3sigma"] = agree;
    out.results["op_mc_points"] = n_max + 1;
  }
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

ExperimentResult run_multiple_mixing(const ExperimentContext& ctx, Exec exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"phi0", "phi1", "phi2", "n1", "n2", "method", "K", "samples"},
               "$.parameters");
  const int d = ctx.model.dimension();
  const Observable phi0 =
      parse_observable(require(p, "phi0", "$.parameters"), d, "$.parameters.phi0");
  const Observable phi1 =
      parse_observable(require(p, "phi1", "$.parameters"), d, "$.parameters.phi1");
  const Observable phi2 =
      parse_observable(require(p, "phi2", "$.parameters"), d, "$.parameters.phi2");
  const int n1 = int(get_int(require(p, "n1", "$.parameters"), "$"));
  const int n2 = int(get_int(require(p, "n2", "$.parameters"), "$"));
  const std::string method =
      p.contains("method") ? p.at("method").get<std::string>() : "both";
  const std::int64_t samples =
      p.contains("samples") ? get_int(p.at("samples"), "$") : ctx.budget.mc_words;

  ExperimentResult out;
  std::optional<TripleResult> op_res, mc_res;
  if (method == "operator" || method == "both") {
    const int K = p.contains("K")
                      ? int(get_int(p.at("K"), "$"))
                      : phi0.max_abs_mode() + phi1.max_abs_mode() +
                            phi2.max_abs_mode() + 1;
    const FourierOperator op = build_galerkin(ctx.model, ctx.measure, K, 0.0);
    try {
      op_res = triple_correlation_operator(op, phi0, phi1, phi2, n1, n2);
    } catch (const BudgetError& e) {
      out.warnings.push_back(std::string("operator route unavailable: ") +
                             e.what());
      mc_res = triple_correlation_mc(ctx.model, ctx.measure, phi0, phi1, phi2,
                                     n1, n2, samples, ctx.seed, exec);
      mc_res->mc_fallback = true;
    }
  }
  if ((method == "monte-carlo" || method == "both") && !mc_res)
    mc_res = triple_correlation_mc(ctx.model, ctx.measure, phi0, phi1, phi2, n1,
                                   n2, samples, ctx.seed, exec);

  if (op_res) {
    out.results["operator"] = {{"re", op_res->value.real()},
                               {"im", op_res->value.imag()}};
  }
  if (mc_res) {
    out.results["monte_carlo"] = {{"re", mc_res->value.real()},
                                  {"im", mc_res->value.imag()},
                                  {"stderr", mc_res->stderr_},
                                  {"fallback", mc_res->mc_fallback}};
  }
  if (op_res && mc_res) {
    out.results["agree_3sigma"] =
        std::abs(op_res->value - mc_res->value) <= 3.0 * mc_res->stderr_ + 1e-13;
  }
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("route,re,im,stderr");
  if (op_res) csv.row("operator", op_res->value.real(), op_res->value.imag(), 0.0);
  if (mc_res)
    csv.row("monte-carlo", mc_res->value.real(), mc_res->value.imag(),
            mc_res->stderr_);
  out.csv = csv.str();
  return out;
}

GreenKuboReport gk_from_params(const ExperimentContext& ctx, const Json& p,
                               const Observable& phi) {
  const int gk_n_max =
      p.contains("gk_n_max") ? int(get_int(p.at("gk_n_max"), "$")) : 200;
  const int K = p.contains("K") ? int(get_int(p.at("K"), "$"))
                                : phi.max_abs_mode() + 1;
  const FourierOperator op = build_galerkin(ctx.model, ctx.measure, K, 0.0);
  return green_kubo_variance(op, phi, gk_n_max);
}

ExperimentResult run_clt(const ExperimentContext& ctx, Exec exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"phi", "N", "trials", "gk_n_max", "K"}, "$.parameters");
  const Observable phi = parse_observable(require(p, "phi", "$.parameters"),
                                          ctx.model.dimension(), "$.parameters.phi");
  const std::int64_t N = get_int(require(p, "N", "$.parameters"), "$");
  const std::int64_t trials = get_int(require(p, "trials", "$.parameters"), "$");

  const GreenKuboReport gk = gk_from_params(ctx, p, phi);
  const CLTReport rep =
      clt_experiment(ctx.model, ctx.measure, phi, N, trials, ctx.seed, gk, exec);

  ExperimentResult out;
  out.results["sigma2_gk"] = rep.sigma2_gk;
  out.results["gk_available"] = rep.gk_available;
  out.results["gk_partial_sum"] = gk.partial_sum;
  out.results["gk_tail_bound"] = gk.tail_bound;
  out.results["gk_diagnostic"] = gk.diagnostic;
  out.results["theta_hat"] = gk.fit.theta_hat;
  out.results["sigma2_mc"] = rep.sigma2_mc;
  out.results["ks_distance"] = rep.ks_distance;
  out.results["N"] = rep.N;
  out.results["trials"] = rep.trials;
  out.results["degenerate_zero"] = rep.degenerate_zero;
  out.results["used_empirical_variance"] = rep.used_empirical_variance;
  if (!rep.diagnostic.empty()) out.warnings.push_back(rep.diagnostic);
  if (!gk.available)
    out.warnings.push_back("Green-Kubo variance unavailable: " + gk.diagnostic);
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("sigma2_gk,sigma2_mc,ks_distance,N,trials");
  csv.row(rep.sigma2_gk, rep.sigma2_mc, rep.ks_distance, rep.N, rep.trials);
  out.csv = csv.str();
  return out;
}

ExperimentResult run_berry_esseen(const ExperimentContext& ctx, Exec exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"phi", "N_list", "trials", "gk_n_max", "K"}, "$.parameters");
  const Observable phi = parse_observable(require(p, "phi", "$.parameters"),
                                          ctx.model.dimension(), "$.parameters.phi");
  std::vector<std::int64_t> N_list;
  for (const auto& n : require(p, "N_list", "$.parameters"))
    N_list.push_back(get_int(n, "$.parameters.N_list"));
  const std::int64_t trials = get_int(require(p, "trials", "$.parameters"), "$");

  const GreenKuboReport gk = gk_from_params(ctx, p, phi);
  const BerryEsseenReport rep = berry_esseen_scaling(
      ctx.model, ctx.measure, phi, N_list, trials, ctx.seed, gk, exec);

  ExperimentResult out;
  out.results["sigma2_gk"] = gk.sigma2;
  out.results["max_sqrtN_ks"] = rep.max_sqrtN_ks;
  out.results["increasing_trend"] = rep.increasing_trend;
  out.results["mk_p_value"] = rep.mk_p_value;
  Json rows = Json::array();
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("N,ks,sqrtN_ks");
  for (const auto& row : rep.rows) {
    rows.push_back({{"N", row.N}, {"ks", row.ks}, {"sqrtN_ks", row.sqrtN_ks}});
    csv.row(row.N, row.ks, row.sqrtN_ks);
  }
  out.results["rows"] = rows;
  out.csv = csv.str();
  out.csv_name = "series.csv";
  return out;
}

ExperimentResult run_dd_distance(const ExperimentContext& ctx, Exec) {
  const Json& p = ctx.parameters;
  require_keys(p, {"other_model", "other_measure", "grid_points"},
               "$.parameters");
  const Model other =
      p.contains("other_model")
          ? parse_model(p.at("other_model"), "$.parameters.other_model")
          : ctx.model;
  const DrivingMeasure other_mu = parse_measure(
      require(p, "other_measure", "$.parameters"), other,
      "$.parameters.other_measure");
  DdGrid grid;
  if (p.contains("grid_points"))
    grid.points_per_dim = int(get_int(p.at("grid_points"), "$"));
  const double dd = dd_distance(ctx.model, ctx.measure, other, other_mu, grid);

  ExperimentResult out;
  out.results["dd"] = dd;
  CsvBuilder csv(ctx.config_hash, ctx.seed);
  csv.header("dd");
  csv.row(dd);
  out.csv = csv.str();
  return out;
}

}  // namespace

RunOutput run_experiment(const ExperimentContext& ctx, Exec exec) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  if (ctx.experiment == "expansion")
    res = run_expansion(ctx, exec);
  else if (ctx.experiment == "lyapunov")
    res = run_lyapunov(ctx, exec);
  else if (ctx.experiment == "spectrum")
    res = run_spectrum(ctx, exec);
  else if (ctx.experiment == "essential-radius")
    res = run_essential_radius(ctx, exec);
  else if (ctx.experiment == "lasota-yorke")
    res = run_lasota_yorke(ctx, exec);
  else if (ctx.experiment == "stability")
    res = run_stability(ctx, exec);
  else if (ctx.experiment == "correlation")
    res = run_correlation(ctx, exec);
  else if (ctx.experiment == "multiple-mixing")
    res = run_multiple_mixing(ctx, exec);
  else if (ctx.experiment == "clt")
    res = run_clt(ctx, exec);
  else if (ctx.experiment == "berry-esseen")
    res = run_berry_esseen(ctx, exec);
  else if (ctx.experiment == "dd-distance")
    res = run_dd_distance(ctx, exec);
  else
    config_fail("$.experiment", "unknown experiment '" + ctx.experiment + "'");
  const auto t1 = std::chrono::steady_clock::now();

  RunOutput out;
  char hash_hex[20];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(ctx.config_hash));
  out.report["config"] = ctx.config_echo;
  out.report["results"] = res.results;
  out.report["warnings"] = res.warnings;
  out.report["provenance"] = {
      {"artifact_version", kArtifactVersion},
      {"report_format_version", kReportFormatVersion},
      {"config_hash", hash_hex},
      {"seed", ctx.seed},
      {"model_hash", ctx.model.hash()},
      {"threads", max_threads()},
      {"wall_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()},
  };
  out.csv = res.csv;
  out.csv_name = res.csv_name;
  return out;
}

namespace {

Json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return j;
}

std::string default_out_root() {
  if (const char* env = std::getenv("RDSLAB_OUT")) return env;
  return "runs";
}

}  // namespace

std::string run_config_file(const std::string& config_path,
                            const CliOptions& opts) {
  Json config = load_json_file(config_path);
  if (opts.seed_override) config["seed"] = *opts.seed_override;
  if (opts.threads > 0) set_threads(opts.threads);

  ExperimentContext ctx = parse_config(config);
  const RunOutput out = run_experiment(ctx);

  fs::path dir;
  if (!opts.out_dir.empty()) {
    dir = opts.out_dir;
  } else {
    const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    char hash_hex[20];
    std::snprintf(hash_hex, sizeof(hash_hex), "%08llx",
                  static_cast<unsigned long long>(ctx.config_hash & 0xFFFFFFFFULL));
    dir = fs::path(default_out_root()) /
          (fs::path(config_path).stem().string() + "-" + hash_hex + "-" +
           std::to_string(stamp));
  }
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "report.json");
    os << out.report.dump(2) << "\n";
  }
  {
    std::ofstream os(dir / out.csv_name);
    os << out.csv;
  }
  return dir.string();
}

SuiteResult run_suite(const std::string& manifest_path, const CliOptions& opts) {
  const Json manifest = load_json_file(manifest_path);
  require_keys(manifest, {"configs"}, "$");
  SuiteResult result;
  const fs::path base = fs::path(manifest_path).parent_path();

  int index = 0;
  for (const auto& entry : require(manifest, "configs", "$")) {
    require_keys(entry, {"path", "assert"}, "$.configs[]");
    const std::string rel = require(entry, "path", "$.configs[]").get<std::string>();
    const fs::path cfg_path = base / rel;

    CliOptions run_opts = opts;
    fs::path out_dir;
    if (!opts.out_dir.empty()) {
      out_dir = fs::path(opts.out_dir) / (std::to_string(index) + "-" +
                                          fs::path(rel).stem().string());
      run_opts.out_dir = out_dir.string();
    }
    ++index;

    Json report;
    std::string error;
    try {
      const std::string dir = run_config_file(cfg_path.string(), run_opts);
      report = load_json_file((fs::path(dir) / "report.json").string());
    } catch (const std::exception& e) {
      error = e.what();
    }

    for (const auto& a : entry.value("assert", Json::array())) {
      require_keys(a, {"path", "op", "rhs", "tol"}, "$.configs[].assert[]");
      SuiteRow row;
      row.config = rel;
      const std::string ptr = require(a, "path", "$.assert").get<std::string>();
      const std::string op = require(a, "op", "$.assert").get<std::string>();
      std::ostringstream desc;
      desc << ptr << " " << op;
      if (a.contains("rhs")) desc << " " << a.at("rhs").dump();
      row.assertion = desc.str();

      if (!error.empty()) {
        row.pass = false;
        row.threshold = "run failed: " + error;
        result.rows.push_back(row);
        result.all_passed = false;
        continue;
      }
      Json value;
      try {
        value = report.at(Json::json_pointer(ptr));
      } catch (...) {
        row.pass = false;
        row.threshold = "missing report path";
        result.rows.push_back(row);
        result.all_passed = false;
        continue;
      }
      if (op == "is_true" || op == "is_false") {
        const bool v = value.is_boolean() && value.get<bool>();
        row.measured = v ? 1.0 : 0.0;
        row.threshold = op;
        row.pass = (op == "is_true") == v;
      } else {
        if (!value.is_number()) {
          row.pass = false;
          row.threshold = "not a number";
          result.rows.push_back(row);
          result.all_passed = false;
          continue;
        }
        row.measured = value.get<double>();
        const double rhs = get_number(require(a, "rhs", "$.assert"), "$.assert.rhs");
        row.threshold = format_double(rhs);
        if (op == "gt")
          row.pass = row.measured > rhs;
        else if (op == "ge")
          row.pass = row.measured >= rhs;
        else if (op == "lt")
          row.pass = row.measured < rhs;
        else if (op == "le")
          row.pass = row.measured <= rhs;
        else if (op == "eq")
          row.pass = row.measured == rhs;
        else if (op == "near") {
          const double tol = get_number(require(a, "tol", "$.assert"), "$.assert.tol");
          row.pass = std::fabs(row.measured - rhs) <= tol;
          row.threshold += " +/- " + format_double(tol);
        } else {
          config_fail("$.assert.op", "unknown op '" + op + "'");
        }
      }
      if (!row.pass) result.all_passed = false;
      result.rows.push_back(row);
    }
  }

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    std::ofstream os(fs::path(opts.out_dir) / "table.csv");
    os << "config,assertion,measured,threshold,pass\n";
    for (const auto& row : result.rows)
      os << row.config << ",\"" << row.assertion << "\","
         << format_double(row.measured) << ",\"" << row.threshold << "\","
         << (row.pass ? "1" : "0") << "\n";
  }
  return result;
}

void export_operator_from_config(const std::string& config_path,
                                 const std::string& out_file) {
  const Json config = load_json_file(config_path);
  const ExperimentContext ctx = parse_config(config);
  const Json& p = ctx.parameters;
  const int K = p.contains("K")
                    ? int(get_int(p.at("K"), "$.parameters.K"))
                    : 8;
  const double s = p.contains("s") ? get_number(p.at("s"), "$.parameters.s") : 0.0;
  const FourierOperator op = build_galerkin(ctx.model, ctx.measure, K, s);
  export_operator(op, out_file);
}

}  // namespace rdsl
