#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle_utils.hpp"

#include "rdsl/measure.hpp"
#include "rdsl/models.hpp"
#include "rdsl/rng.hpp"

#include <map>

using namespace rdsl;

namespace {

Model two_shift_model() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  cfg.matrices = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
  Vec b0(2), b1(2);
  b0 << 0.3, 0.7;
  b1 << 0.1, 0.2;
  cfg.offsets = {b0, b1};
  return build_model(cfg);
}

Model cat_model() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat a(2, 2);
  a << 2, 1, 1, 1;
  cfg.matrices = {a};
  return build_model(cfg);
}

Model translation_model(const std::vector<Vec>& shifts) {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  for (const auto& b : shifts) {
    cfg.matrices.push_back(Mat::Identity(int(b.size()), int(b.size())));
    cfg.offsets.push_back(b);
  }
  return build_model(cfg);
}

}  // namespace

TEST_CASE("sample_word: deterministic measure gives the constant word") {
  const DrivingMeasure mu = DrivingMeasure::dirac(5);
  const Word w = sample_word(mu, 3, 991);
  REQUIRE(w.letters.size() == 3);
  for (const auto& l : w.letters) CHECK(l.map_id == 5);
  CHECK(w.weight == doctest::Approx(1.0));
  CHECK(w.draws == 3);
}

TEST_CASE("sample_word: identical seeds reproduce identical words") {
  const DrivingMeasure mu = DrivingMeasure::uniform_on({0, 1, 2});
  const Word a = sample_word(mu, 16, 12345);
  const Word b = sample_word(mu, 16, 12345);
  REQUIRE(a.letters.size() == b.letters.size());
  for (std::size_t i = 0; i < a.letters.size(); ++i)
    CHECK(a.letters[i].map_id == b.letters[i].map_id);
  const Word c = sample_word(mu, 16, 12346);
  bool all_same = true;
  for (std::size_t i = 0; i < a.letters.size(); ++i)
    all_same = all_same && a.letters[i].map_id == c.letters[i].map_id;
  CHECK_FALSE(all_same);
}

TEST_CASE("sample_word: two-letter words are uniform over the four cells") {
  const DrivingMeasure mu = DrivingMeasure::uniform_on({0, 1});
  const std::int64_t draws = 100000;
  std::vector<std::int64_t> counts(4, 0);
  for (std::int64_t s = 0; s < draws; ++s) {
    const Word w = sample_word(mu, 2, split_seed(7, std::uint64_t(s)));
    ++counts[std::size_t(2 * w.letters[0].map_id + w.letters[1].map_id)];
  }
  // 3-sigma binomial window around 1/4 per cell.
  const double sigma = std::sqrt(0.25 * 0.75 / double(draws));
  for (const auto c : counts)
    CHECK(std::fabs(double(c) / double(draws) - 0.25) < 3.0 * sigma);
  CHECK(oracle::chi_square_p(counts, {0.25, 0.25, 0.25, 0.25}) > 0.001);
}

TEST_CASE("sample_word: parametric phases are uniform on the period") {
  const DrivingMeasure mu = DrivingMeasure::uniform_phase(0, 0.5);
  std::vector<double> phases;
  for (int s = 0; s < 20000; ++s) {
    const Word w = sample_word(mu, 1, split_seed(0, std::uint64_t(s)));
    REQUIRE(w.letters.size() == 1);
    REQUIRE(w.letters[0].has_phase);
    REQUIRE(w.letters[0].phase >= 0.0);
    REQUIRE(w.letters[0].phase < 0.5);
    phases.push_back(w.letters[0].phase);
  }
  CHECK(oracle::ks_uniform(phases, 0.5) < oracle::ks_critical_01(phases.size()));
}

TEST_CASE("enumerate_words: exhaustive binary words") {
  const DrivingMeasure mu = DrivingMeasure::uniform_on({0, 1});
  const auto words = enumerate_words(mu, 2, 1000000);
  REQUIRE(words.size() == 4);
  double total = 0.0;
  for (const auto& w : words) {
    CHECK(w.weight == doctest::Approx(0.25));
    total += w.weight;
  }
  CHECK(std::fabs(total - 1.0) < 1e-12);
}

TEST_CASE("enumerate_words: product law for weighted atoms") {
  const DrivingMeasure mu = DrivingMeasure::finite(
      {MapAtom{0, 0.3, std::nullopt}, MapAtom{1, 0.7, std::nullopt}});
  const auto words = enumerate_words(mu, 3, 1000000);
  REQUIRE(words.size() == 8);
  double ggg = -1.0, total = 0.0;
  for (const auto& w : words) {
    total += w.weight;
    bool all_g = true;
    for (const auto& l : w.letters) all_g = all_g && l.map_id == 1;
    if (all_g) ggg = w.weight;
  }
  CHECK(ggg == doctest::Approx(0.343).epsilon(1e-12));
  CHECK(std::fabs(total - 1.0) < 1e-12);
}

TEST_CASE("enumerate_words: cap overflow names the word count") {
  const DrivingMeasure mu = DrivingMeasure::uniform_on({0, 1, 2});
  try {
    enumerate_words(mu, 13, 1000000);
    FAIL("expected a budget error");
  } catch (const BudgetError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("1594323") != std::string::npos);
  }
}

TEST_CASE("enumerate_words: parametric measures are not enumerable") {
  const DrivingMeasure mu = DrivingMeasure::uniform_phase(0, 1.0);
  CHECK_THROWS_AS(enumerate_words(mu, 2, 100), UnsupportedError);
}

TEST_CASE("sample vs enumerate: empirical cell frequencies match weights") {
  const DrivingMeasure mu = DrivingMeasure::finite(
      {MapAtom{0, 0.2, std::nullopt}, MapAtom{1, 0.5, std::nullopt},
       MapAtom{2, 0.3, std::nullopt}});
  const auto words = enumerate_words(mu, 2, 1000000);
  std::map<std::pair<int, int>, double> expected;
  for (const auto& w : words)
    expected[{w.letters[0].map_id, w.letters[1].map_id}] = w.weight;

  std::map<std::pair<int, int>, std::int64_t> counts;
  const std::int64_t draws = 100000;
  for (std::int64_t s = 0; s < draws; ++s) {
    const Word w = sample_word(mu, 2, split_seed(99, std::uint64_t(s)));
    ++counts[{w.letters[0].map_id, w.letters[1].map_id}];
  }
  std::vector<std::int64_t> cs;
  std::vector<double> ps;
  for (const auto& [cell, p] : expected) {
    ps.push_back(p);
    cs.push_back(counts[cell]);
  }
  CHECK(oracle::chi_square_p(cs, ps) > 0.001);
}

TEST_CASE("measure validation rejects bad weights") {
  CHECK_THROWS_AS(DrivingMeasure::finite({MapAtom{0, 0.5, std::nullopt}}),
                  ConfigError);
  CHECK_THROWS_AS(DrivingMeasure::finite({MapAtom{0, 1.2, std::nullopt},
                                          MapAtom{1, -0.2, std::nullopt}}),
                  ConfigError);
  CHECK_THROWS_AS(DrivingMeasure::uniform_phase(0, 0.0), ConfigError);
  CHECK_THROWS_AS(DrivingMeasure::convolution({}), ConfigError);
}

TEST_CASE("transform_measure: 2x2 inverse and the symmetric case") {
  const Model model = cat_model();
  const DrivingMeasure mu = DrivingMeasure::dirac(0);

  const DrivingMeasure inv = transform_measure(mu, MapTransform::Inverse, &model);
  const Mat a_inv = model.linear_part(
      MapInstance{0, 0.0, false, inv.transform});
  Mat expected(2, 2);
  expected << 1, -1, -1, 2;
  CHECK((a_inv - expected).cwiseAbs().maxCoeff() < 1e-12);

  const DrivingMeasure invt =
      transform_measure(mu, MapTransform::InverseTranspose, &model);
  const Mat a_invt = model.linear_part(MapInstance{0, 0.0, false, invt.transform});
  CHECK((a_invt - expected).cwiseAbs().maxCoeff() < 1e-12);  // symmetric A
}

TEST_CASE("transform_measure: transpose of the {S, S^T} pair is the same set") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  Mat s(2, 2), st(2, 2);
  s << 1, 1, 0, 1;
  st << 1, 0, 1, 1;
  cfg.matrices = {s, st};
  const Model model = build_model(cfg);
  const DrivingMeasure mu = DrivingMeasure::uniform_on({0, 1});
  const DrivingMeasure tr = transform_measure(mu, MapTransform::Transpose, &model);

  // The transformed atoms are {S^T, S}: the same set of matrices.
  std::vector<Mat> mats;
  for (const auto& a : tr.atoms)
    mats.push_back(model.linear_part(MapInstance{a.map_id, 0, false, tr.transform}));
  const bool matches = ((mats[0] - st).cwiseAbs().maxCoeff() < 1e-12 &&
                        (mats[1] - s).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(matches);
}

TEST_CASE("transform_measure: involutions and the transform algebra") {
  const Model model = cat_model();
  const DrivingMeasure mu = DrivingMeasure::dirac(0);
  for (const auto t : {MapTransform::Inverse, MapTransform::Transpose}) {
    const DrivingMeasure twice =
        transform_measure(transform_measure(mu, t, &model), t, &model);
    CHECK(twice.transform == MapTransform::Identity);
  }
  const DrivingMeasure a = transform_measure(
      transform_measure(mu, MapTransform::Inverse, &model),
      MapTransform::Transpose, &model);
  const DrivingMeasure b = transform_measure(
      transform_measure(mu, MapTransform::Transpose, &model),
      MapTransform::Inverse, &model);
  const DrivingMeasure c = transform_measure(mu, MapTransform::InverseTranspose, &model);
  const Mat ma = model.linear_part(MapInstance{0, 0, false, a.transform});
  const Mat mb = model.linear_part(MapInstance{0, 0, false, b.transform});
  const Mat mc = model.linear_part(MapInstance{0, 0, false, c.transform});
  CHECK((ma - mc).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((mb - mc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("transform_measure: transpose refused on nonlinear models") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::Pierrehumbert;
  cfg.tau = 1.0;
  const Model model = build_model(cfg);
  CHECK_THROWS_AS(
      transform_measure(model.default_measure(), MapTransform::Transpose, &model),
      UnsupportedError);
}

TEST_CASE("transform_measure: inverse reverses convolution order") {
  const DrivingMeasure conv = DrivingMeasure::convolution(
      {DrivingMeasure::dirac(0), DrivingMeasure::dirac(1)});
  const DrivingMeasure inv = transform_measure(conv, MapTransform::Inverse);
  REQUIRE(inv.factors.size() == 2);
  CHECK(inv.factors[0].atoms[0].map_id == 1);
  CHECK(inv.factors[1].atoms[0].map_id == 0);
  const DrivingMeasure invt =
      transform_measure(conv, MapTransform::InverseTranspose);
  CHECK(invt.factors[0].atoms[0].map_id == 0);  // order preserved
}

TEST_CASE("dd_distance: identical measures couple on the diagonal") {
  Vec b0(2), b1(2);
  b0 << 0.25, 0.5;
  b1 << 0.125, 0.0;
  const Model model = translation_model({b0, b1});
  const DrivingMeasure mu = model.default_measure();
  CHECK(dd_distance(model, mu, model, mu, DdGrid{16}) == doctest::Approx(0.0));
}

TEST_CASE("dd_distance: translations have the closed form sqrt(2 dist)") {
  Vec b0(2), b1(2);
  b0 << 0.25, 0.5;
  b1 << 0.3, 0.5;
  const Model model = translation_model({b0, b1});
  const double dist = torus_dist(TorusPoint(b0), TorusPoint(b1));
  const double dd = dd_distance(model, DrivingMeasure::dirac(0), model,
                                DrivingMeasure::dirac(1), DdGrid{16});
  CHECK(dd == doctest::Approx(std::sqrt(2.0 * dist)).epsilon(1e-10));
}

TEST_CASE("dd_distance: relabeled measures couple by the permutation") {
  Vec b0(2), b1(2);
  b0 << 0.25, 0.5;
  b1 << 0.6, 0.9;
  const Model model = translation_model({b0, b1});
  const DrivingMeasure ab = DrivingMeasure::uniform_on({0, 1});
  const DrivingMeasure ba = DrivingMeasure::uniform_on({1, 0});
  CHECK(dd_distance(model, ab, model, ba, DdGrid{8}) == doctest::Approx(0.0));
}

TEST_CASE("dd_distance: pseudometric on translation triples") {
  RngStream rng(2024, 0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Vec> shifts;
    for (int i = 0; i < 6; ++i) {
      Vec b(2);
      b << rng.next_unit(), rng.next_unit();
      shifts.push_back(b);
    }
    const Model model = translation_model(shifts);
    const DrivingMeasure mu_a = DrivingMeasure::uniform_on({0, 1});
    const DrivingMeasure mu_b = DrivingMeasure::uniform_on({2, 3});
    const DrivingMeasure mu_c = DrivingMeasure::uniform_on({4, 5});
    const DdGrid grid{8};
    const double ab = dd_distance(model, mu_a, model, mu_b, grid);
    const double ba = dd_distance(model, mu_b, model, mu_a, grid);
    const double bc = dd_distance(model, mu_b, model, mu_c, grid);
    const double ac = dd_distance(model, mu_a, model, mu_c, grid);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ac <= ab + bc + 1e-10);
  }
}

TEST_CASE("transport_lp: matches brute force on uniform marginals") {
  RngStream rng(55, 1);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + int(rng.next_index(4));  // 2..5
    Mat cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = rng.next_unit();
    const Vec uniform = Vec::Constant(n, 1.0 / n);
    const double lp = transport_lp(cost, uniform, uniform);
    const double brute = oracle::brute_force_uniform_transport(cost);
    CHECK(lp == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("transport_lp: unbalanced and degenerate cases") {
  Mat cost(2, 3);
  cost << 1, 2, 3, 4, 5, 6;
  Vec supply(2), demand(3);
  supply << 0.5, 0.5;
  demand << 0.2, 0.3, 0.5;
  const double v = transport_lp(cost, supply, demand);
  // Optimal: route 0.2+0.3 from row 0, 0.5 from row 1 to column 2.
  CHECK(v == doctest::Approx(0.2 * 1 + 0.3 * 2 + 0.5 * 6).epsilon(1e-12));
  demand << 0.2, 0.3, 0.6;
  CHECK_THROWS_AS(transport_lp(cost, supply, demand), ConfigError);
}
