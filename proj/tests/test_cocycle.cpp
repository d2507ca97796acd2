#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle_utils.hpp"

#include "rdsl/cocycle.hpp"
#include "rdsl/rng.hpp"

#include <cmath>

using namespace rdsl;

namespace {

Model cat_model() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat a(2, 2);
  a << 2, 1, 1, 1;
  cfg.matrices = {a};
  return build_model(cfg);
}

Model zariski_pair() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat a(2, 2), b(2, 2);
  a << 1, 2, 0, 1;
  b << 1, 0, 2, 1;
  cfg.matrices = {a, b};
  return build_model(cfg);
}

Model translation_model() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  cfg.matrices = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
  Vec b0(2), b1(2);
  b0 << 0.17, 0.62;
  b1 << 0.55, 0.91;
  cfg.offsets = {b0, b1};
  return build_model(cfg);
}

Model shear_pair_model() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat s(2, 2), st(2, 2);
  s << 1, 1, 0, 1;
  st << 1, 0, 1, 1;
  cfg.matrices = {s, st};
  return build_model(cfg);
}

Model block_shear_model(int power) {
  ModelConfig cfg;
  cfg.variant = ModelVariant::LinearCocycle;
  Mat b0(2, 2), b1(2, 2);
  b0 << 1, 2, 0, 1;
  b1 << 1, 0, 2, 1;
  cfg.block_shear = BlockShearSpec{{b0, b1}, power, 10.0};
  return build_model(cfg);
}

const double kCatLambda = std::log((3.0 + std::sqrt(5.0)) / 2.0);

Vec cat_unstable_dir() {
  Vec v(2);
  v << 1.0, (std::sqrt(5.0) - 1.0) / 2.0;
  return v / v.norm();
}

Mat random_orthonormal(int d, int k, RngStream& rng) {
  Mat g(d, k);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) g(i, j) = rng.next_gaussian();
  Eigen::HouseholderQR<Mat> qr(g);
  return qr.householderQ() * Mat::Identity(d, k);
}

TorusPoint random_point(int d, RngStream& rng) {
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.next_unit();
  return TorusPoint(x);
}

}  // namespace

TEST_CASE("cotangent expansion vanishes for translations") {
  const Model model = translation_model();
  RngStream rng(1, 0);
  for (int rep = 0; rep < 5; ++rep) {
    Vec xi(2);
    xi << rng.next_gaussian(), rng.next_gaussian();
    xi /= xi.norm();
    const CotangentFrame frame{random_point(2, rng), xi};
    const auto est = cotangent_expansion(model, model.default_measure(),
                                         1 + int(rng.next_index(4)), frame,
                                         Budget{}, 7);
    CHECK(est.mode == EstimateMode::ExactEnumeration);
    CHECK(est.value == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("cat map: stable covector realizes the eigenvalue rate") {
  const Model model = cat_model();
  const CotangentFrame frame{TorusPoint::zero(2), cat_unstable_dir()};
  const auto est = cotangent_expansion(model, model.default_measure(), 1, frame,
                                       Budget{}, 7);
  const double expected = std::log((3.0 - std::sqrt(5.0)) / 2.0);
  CHECK(est.value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(est.stderr_ == 0.0);
}

TEST_CASE("exact enumeration matches an independent re-implementation") {
  // Uniform on {S, S^T}, N = 2, xi = e1: hand-rolled word sum.
  const Model model = shear_pair_model();
  Vec xi(2);
  xi << 1.0, 0.0;
  const auto est = cotangent_expansion(model, model.default_measure(), 2,
                                       CotangentFrame{TorusPoint::zero(2), xi},
                                       Budget{}, 7);
  REQUIRE(est.mode == EstimateMode::ExactEnumeration);

  // Inverse transposes of S and S^T, written out by hand.
  Mat s_it(2, 2), st_it(2, 2);
  s_it << 1, 0, -1, 1;
  st_it << 1, -1, 0, 1;
  const Mat mats[2] = {s_it, st_it};
  double acc = 0.0;
  for (int first = 0; first < 2; ++first)
    for (int second = 0; second < 2; ++second) {
      const Vec pushed = mats[second] * (mats[first] * xi);
      acc += 0.25 * std::log(pushed.norm());
    }
  CHECK(est.value == doctest::Approx(acc / 2.0).epsilon(1e-12));
}

TEST_CASE("tangent expansion: flat subspace of the block-shear family") {
  const Model model = block_shear_model(3);
  const DrivingMeasure mu = model.default_measure();
  // Per-word growth of vectors supported on the last two coordinates is
  // exactly zero for every atom.
  for (int id = 0; id < model.map_count(); ++id) {
    Word w;
    w.draws = 1;
    Letter l;
    l.map_id = id;
    l.weight = 1.0;
    w.letters = {l};
    Vec v(4);
    v << 0, 0, 0.8, 0.6;
    CHECK(tangent_log_growth(model, w, TorusPoint::zero(4), v) == 0.0);
  }
  Vec v(4);
  v << 0, 0, 1, 0;
  const auto est = tangent_expansion(model, mu, 1, TorusPoint::zero(4), v,
                                     Budget{}, 5);
  CHECK(est.value == 0.0);
  CHECK(est.mode == EstimateMode::ExactEnumeration);
}

TEST_CASE("k-plane expansion: full planes and lines") {
  const Model model = zariski_pair();
  const DrivingMeasure mu = model.default_measure();
  RngStream rng(3, 0);

  // k = d: covolume is the determinant, zero for unimodular maps.
  const PlaneFrame full{TorusPoint::zero(2), Mat::Identity(2, 2)};
  const auto full_est = kplane_expansion(model, mu, 3, full, Budget{}, 7);
  CHECK(full_est.value == doctest::Approx(0.0).epsilon(1e-14));

  // k = 1 reduces to the tangent expansion on shared words.
  for (int rep = 0; rep < 5; ++rep) {
    const Mat line = random_orthonormal(2, 1, rng);
    const PlaneFrame plane{TorusPoint::zero(2), line};
    const auto kp = kplane_expansion(model, mu, 2, plane, Budget{}, 7);
    const auto tg = tangent_expansion(model, mu, 2, TorusPoint::zero(2),
                                      line.col(0), Budget{}, 7);
    CHECK(kp.value == doctest::Approx(tg.value).epsilon(1e-12));
  }
}

TEST_CASE("conormal identity: explicit 2x2 words") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat s(2, 2);
  s << 1, 1, 0, 1;
  cfg.matrices = {Mat::Identity(2, 2), s};
  const Model model = build_model(cfg);

  Word identity_word;
  identity_word.draws = 1;
  identity_word.letters = {Letter{0, 0, false, MapTransform::Identity, 1.0}};
  Word shear_word;
  shear_word.draws = 1;
  shear_word.letters = {Letter{1, 0, false, MapTransform::Identity, 1.0}};

  Mat e1 = Mat::Zero(2, 1), e2 = Mat::Zero(2, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;

  const auto id_check =
      conormal_check(model, identity_word, PlaneFrame{TorusPoint::zero(2), e1});
  CHECK(id_check.covolume_growth == doctest::Approx(1.0));
  CHECK(id_check.conormal_growth == doctest::Approx(1.0));

  const auto span_e1 =
      conormal_check(model, shear_word, PlaneFrame{TorusPoint::zero(2), e1});
  CHECK(span_e1.covolume_growth == doctest::Approx(1.0));
  CHECK(span_e1.conormal_growth == doctest::Approx(1.0));

  const auto span_e2 =
      conormal_check(model, shear_word, PlaneFrame{TorusPoint::zero(2), e2});
  CHECK(span_e2.covolume_growth == doctest::Approx(std::sqrt(2.0)));
  CHECK(span_e2.conormal_growth == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("conormal identity holds on random words and hyperplanes") {
  RngStream rng(11, 0);
  std::vector<Model> models;
  models.push_back(cat_model());
  {
    ModelConfig cfg;
    cfg.variant = ModelVariant::AffineTorus;
    Mat a(3, 3);
    a << 0, 1, 0, 0, 0, 1, 1, 0, 0;  // cyclic permutation, det 1
    Mat b(3, 3);
    b << 1, 1, 0, 0, 1, 1, 0, 0, 1;
    cfg.matrices = {a, b};
    models.push_back(build_model(cfg));
  }
  models.push_back(lift_product(cat_model(), 2));
  {
    ModelConfig cfg;
    cfg.variant = ModelVariant::Pierrehumbert;
    cfg.tau = 1.3;
    models.push_back(build_model(cfg));
  }

  for (const Model& model : models) {
    const int d = model.dimension();
    for (int rep = 0; rep < 500; ++rep) {
      const int n = 1 + int(rng.next_index(4));
      const Word w = sample_word(model.default_measure(), n, rng.next_u64());
      const PlaneFrame plane{random_point(d, rng),
                             random_orthonormal(d, d - 1, rng)};
      const auto chk = conormal_check(model, w, plane);
      CHECK(std::fabs(chk.covolume_growth - chk.conormal_growth) < 1e-10);
    }
  }
}

TEST_CASE("conormal check refuses non-volume-preserving fibers") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::LinearCocycle;
  Mat m(2, 2);
  m << 2, 0, 0, 1;  // det 2
  cfg.matrices = {m};
  const Model model = build_model(cfg);
  Word w;
  w.draws = 1;
  w.letters = {Letter{0, 0, false, MapTransform::Identity, 1.0}};
  Mat e1 = Mat::Zero(2, 1);
  e1(0, 0) = 1.0;
  CHECK_THROWS_AS(conormal_check(model, w, PlaneFrame{TorusPoint::zero(2), e1}),
                  UnsupportedError);
}

TEST_CASE("expansion infimum: translations and the cat map") {
  const Model trans = translation_model();
  const auto zero = expansion_lambda(trans, trans.default_measure(), 2,
                                     CocycleKind::Cotangent, SearchPlan{},
                                     Budget{}, 7);
  CHECK(zero.value == doctest::Approx(0.0).epsilon(1e-15));

  const Model cat = cat_model();
  SearchPlan plan;
  plan.refine_rounds = 8;
  const auto inf = expansion_lambda(cat, cat.default_measure(), 1,
                                    CocycleKind::Cotangent, plan, Budget{}, 7);
  CHECK(inf.value ==
        doctest::Approx(std::log((3.0 - std::sqrt(5.0)) / 2.0)).epsilon(2e-3));
  // The witness covector aligns with the unstable direction of A.
  const Vec w = inf.witness.frame.col(0);
  CHECK(std::fabs(std::fabs(w.dot(cat_unstable_dir())) - 1.0) < 1e-2);
}

TEST_CASE("expansion infimum: point-base models search only the fiber") {
  const Model model = block_shear_model(2);
  SearchPlan plan;
  plan.directions = 64;
  const auto est = expansion_lambda(model, model.default_measure(), 1,
                                    CocycleKind::Cotangent, plan, Budget{}, 7);
  CHECK(est.witness.base.coords().cwiseAbs().maxCoeff() == 0.0);
  CHECK(est.mode == EstimateMode::ExactEnumeration);
}

TEST_CASE("two-dimensional equivalence of tangent and cotangent infima") {
  // For area-preserving 2x2 cocycles A^{-T} = R A R^T, so the two infima
  // agree exactly; the search recovers both to refinement accuracy.
  for (const Model& model : {cat_model(), zariski_pair()}) {
    SearchPlan plan;
    plan.refine_rounds = 8;
    const auto tan = expansion_lambda(model, model.default_measure(), 2,
                                      CocycleKind::Tangent, plan, Budget{}, 7);
    const auto cot = expansion_lambda(model, model.default_measure(), 2,
                                      CocycleKind::Cotangent, plan, Budget{}, 7);
    CHECK(std::fabs(tan.value - cot.value) < 5e-3);
  }
}

TEST_CASE("superadditivity under convolution powers") {
  const Model model = zariski_pair();
  const DrivingMeasure mu = model.default_measure();
  const int N = 2;
  SearchPlan plan;
  const auto base = expansion_lambda(model, mu, N, CocycleKind::Cotangent, plan,
                                     Budget{}, 7);
  for (const int j : {2, 3}) {
    const auto powered = expansion_lambda(model, mu, N * j,
                                          CocycleKind::Cotangent, plan,
                                          Budget{}, 7);
    REQUIRE(powered.mode == EstimateMode::ExactEnumeration);
    const double total_powered = powered.value * N * j;
    const double total_base = base.value * N;
    CHECK(total_powered >= j * total_base - 1e-12);
  }
}

TEST_CASE("k-point lift keeps the cotangent sign (matched words)") {
  const Model base = zariski_pair();
  const Model lifted = lift_product(base, 2);
  const int N = 4;
  const auto b = expansion_lambda(base, base.default_measure(), N,
                                  CocycleKind::Cotangent, SearchPlan{},
                                  Budget{}, 99);
  const auto l = expansion_lambda(lifted, lifted.default_measure(), N,
                                  CocycleKind::Cotangent, SearchPlan{},
                                  Budget{}, 99);
  REQUIRE(b.mode == EstimateMode::ExactEnumeration);
  REQUIRE(l.mode == EstimateMode::ExactEnumeration);
  if (b.value >= 0.0) CHECK(l.value >= 0.0);
}

TEST_CASE("lyapunov spectrum: translations are neutral") {
  const Model model = translation_model();
  const auto rep = lyapunov_spectrum(model, model.default_measure(), 20000,
                                     TorusPoint::zero(2), 5);
  for (int i = 0; i < 2; ++i)
    CHECK(std::fabs(rep.exponents[i]) <= rep.confidence[i] + 1e-12);
}

TEST_CASE("lyapunov spectrum: cat map exponents and the sum rule") {
  const Model model = cat_model();
  const auto rep = lyapunov_spectrum(model, model.default_measure(), 1000000,
                                     TorusPoint::zero(2), 5);
  CHECK(rep.exponents[0] == doctest::Approx(kCatLambda).epsilon(1e-3));
  CHECK(rep.exponents[1] == doctest::Approx(-kCatLambda).epsilon(1e-3));
  CHECK(std::fabs(rep.exponents.sum()) <= rep.confidence.sum() + 1e-10);
}

TEST_CASE("lyapunov spectrum: sum rule on the random shear pair") {
  const Model model = zariski_pair();
  const auto rep = lyapunov_spectrum(model, model.default_measure(), 200000,
                                     TorusPoint::zero(2), 17);
  CHECK(std::fabs(rep.exponents.sum()) <= rep.confidence.sum() + 1e-10);
  CHECK(rep.exponents[0] > 0.0);
}

TEST_CASE("furstenberg integral: cat map from the unstable direction") {
  const Model model = cat_model();
  const auto est = furstenberg_integral(model, model.default_measure(), 1000,
                                        20000, 3, cat_unstable_dir());
  CHECK(est.value == doctest::Approx(kCatLambda).epsilon(1e-3));
}

TEST_CASE("furstenberg integral: isometric fibers give zero") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::LinearCocycle;
  for (const double a : {0.3, 1.1}) {
    Mat r(2, 2);
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    cfg.matrices.push_back(r);
  }
  const Model model = build_model(cfg);
  const auto est = furstenberg_integral(model, model.default_measure(), 500,
                                        5000, 3);
  CHECK(std::fabs(est.value) <= std::max(2.0 * est.stderr_, 1e-12));
}

TEST_CASE("furstenberg integral agrees with the top exponent for {A, A^-1}") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat a(2, 2), ai(2, 2);
  a << 2, 1, 1, 1;
  ai << 1, -1, -1, 2;
  cfg.matrices = {a, ai};
  const Model model = build_model(cfg);
  const DrivingMeasure mu = model.default_measure();

  const auto lyap = lyapunov_spectrum(model, mu, 400000, TorusPoint::zero(2), 7);
  const auto ic = furstenberg_integral(model, mu, 2000, 200000, 11);
  const double combined =
      lyap.confidence[0] + 2.0 * ic.stderr_;
  CHECK(std::fabs(lyap.exponents[0] - ic.value) <= combined + 1e-3);
}

TEST_CASE("monte carlo fallback fires when enumeration overflows") {
  const Model model = zariski_pair();
  Budget tight;
  tight.word_cap = 100;
  tight.mc_words = 2000;
  Vec xi(2);
  xi << 1, 0;
  const auto est = cotangent_expansion(model, model.default_measure(), 12,
                                       CotangentFrame{TorusPoint::zero(2), xi},
                                       tight, 7);
  CHECK(est.mode == EstimateMode::MonteCarlo);
  CHECK(est.fell_back_to_monte_carlo);
  CHECK(est.stderr_ > 0.0);
  CHECK(est.samples == 2000);
}

TEST_CASE("estimators are bit-identical across execution policies") {
  const Model model = zariski_pair();
  Budget budget;
  budget.word_cap = 4;  // force Monte Carlo
  budget.mc_words = 5000;
  Vec xi(2);
  xi << 0.8, -0.6;
  const CotangentFrame frame{TorusPoint::zero(2), xi};
  const auto serial = cotangent_expansion(model, model.default_measure(), 5,
                                          frame, budget, 123, Exec::Serial);
  const auto parallel = cotangent_expansion(model, model.default_measure(), 5,
                                            frame, budget, 123, Exec::Parallel);
  CHECK(serial.value == parallel.value);
  CHECK(serial.stderr_ == parallel.stderr_);
}
