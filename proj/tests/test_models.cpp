#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle_utils.hpp"

#include "rdsl/measure.hpp"
#include "rdsl/models.hpp"
#include "rdsl/rng.hpp"

#include <numbers>

using namespace rdsl;

namespace {

Model affine(const Mat& a, const Vec& b) {
  ModelConfig cfg;
  cfg.variant = ModelVariant::AffineTorus;
  cfg.matrices = {a};
  cfg.offsets = {b};
  return build_model(cfg);
}

Model cat_model() {
  Mat a(2, 2);
  a << 2, 1, 1, 1;
  return affine(a, Vec::Zero(2));
}

Model pierrehumbert(double tau) {
  ModelConfig cfg;
  cfg.variant = ModelVariant::Pierrehumbert;
  cfg.tau = tau;
  return build_model(cfg);
}

Model standard_map(double L, double eps) {
  ModelConfig cfg;
  cfg.variant = ModelVariant::StandardMap;
  cfg.kick_strength = L;
  cfg.noise_halfwidth = eps;
  return build_model(cfg);
}

TorusPoint pt(double x, double y) {
  Vec v(2);
  v << x, y;
  return TorusPoint(v);
}

const std::vector<Model>& zoo() {
  static const std::vector<Model> models = [] {
    std::vector<Model> out;
    out.push_back(cat_model());
    Mat s(2, 2);
    s << 1, 2, 0, 1;
    Vec b(2);
    b << 0.25, 0.125;
    out.push_back(affine(s, b));
    out.push_back(pierrehumbert(1.0));
    out.push_back(standard_map(10.0, 0.1));
    return out;
  }();
  return models;
}

MapInstance random_instance(const Model& model, RngStream& rng) {
  MapInstance f;
  f.map_id = int(rng.next_index(std::uint32_t(model.map_count())));
  if (model.parametric(f.map_id)) {
    f.phase = rng.next_unit() * model.phase_period(f.map_id);
    f.has_phase = true;
  }
  return f;
}

TorusPoint random_point(int d, RngStream& rng) {
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.next_unit();
  return TorusPoint(x);
}

}  // namespace

TEST_CASE("affine apply: shear, translation, cat map") {
  Mat s(2, 2);
  s << 1, 1, 0, 1;
  const Model shear = affine(s, Vec::Zero(2));
  const MapInstance f{0, 0, false, MapTransform::Identity};
  const TorusPoint y = shear.apply(f, pt(0.25, 0.5));
  CHECK(y.coords()[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(y.coords()[1] == doctest::Approx(0.5).epsilon(1e-15));

  Vec b(2);
  b << 0.3, 0.4;
  const Model trans = affine(Mat::Identity(2, 2), b);
  const TorusPoint z = trans.apply(f, pt(0.9, 0.9));
  CHECK(z.coords()[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(z.coords()[1] == doctest::Approx(0.3).epsilon(1e-12));

  const TorusPoint c = cat_model().apply(f, pt(0.5, 0.5));
  CHECK(c.coords()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.coords()[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("shear model: plug-in evaluation at phase 0") {
  const Model model = pierrehumbert(1.0);
  const MapInstance f{0, 0.0, true, MapTransform::Identity};
  const TorusPoint y = model.apply(f, pt(0.0, 0.25));
  CHECK(y.coords()[0] ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(y.coords()[1] == doctest::Approx(0.25));
}

TEST_CASE("standard map: kick arithmetic") {
  const Model model = standard_map(10.0, 0.01);
  // phase = eps makes omega = 0.
  const MapInstance f{0, 0.01, true, MapTransform::Identity};
  const TorusPoint y = model.apply(f, pt(0.25, 0.1));
  CHECK(y.coords()[0] ==
        doctest::Approx(torus_reduce(10.0 / (2.0 * std::numbers::pi) - 0.1))
            .epsilon(1e-12));
  CHECK(y.coords()[1] == doctest::Approx(0.25));
}

TEST_CASE("model construction rejects bad parameters") {
  Mat bad(2, 2);
  bad << 2, 0, 0, 1;  // det 2
  CHECK_THROWS_AS(affine(bad, Vec::Zero(2)), ConfigError);
  ModelConfig p;
  p.variant = ModelVariant::Pierrehumbert;
  p.tau = -1.0;
  CHECK_THROWS_AS(build_model(p), ConfigError);
  ModelConfig s;
  s.variant = ModelVariant::StandardMap;
  s.kick_strength = 0.0;
  CHECK_THROWS_AS(build_model(s), ConfigError);
  s.kick_strength = 10.0;
  s.noise_halfwidth = 1.5;
  CHECK_THROWS_AS(build_model(s), ConfigError);
}

TEST_CASE("inverse-then-forward round trips") {
  RngStream rng(17, 0);
  for (const Model& model : zoo()) {
    for (int rep = 0; rep < 2500; ++rep) {
      MapInstance f = random_instance(model, rng);
      const TorusPoint x = random_point(model.dimension(), rng);
      MapInstance finv = f;
      finv.transform = MapTransform::Inverse;
      const TorusPoint back = model.apply(f, model.apply(finv, x));
      CHECK(torus_dist(back, x) < 1e-10);
    }
  }
}

TEST_CASE("jacobians: affine constant, shear analytic vs finite differences") {
  const Model cat = cat_model();
  const MapInstance f0{0, 0, false, MapTransform::Identity};
  const JacobianPair jp = cat.jacobian_pair(f0, pt(0.3, 0.8));
  Mat a(2, 2), a_invt(2, 2);
  a << 2, 1, 1, 1;
  a_invt << 1, -1, -1, 2;
  CHECK((jp.jac - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((jp.cojac - a_invt.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const Model ph = pierrehumbert(1.0);
  const double t = 0.37;
  const MapInstance fh{0, t, true, MapTransform::Identity};
  const TorusPoint x = pt(0.15, 0.6);
  const JacobianPair jph = ph.jacobian_pair(fh, x);
  const double c = std::cos(2.0 * std::numbers::pi * (0.6 + t));
  CHECK(jph.jac(0, 0) == 1.0);
  CHECK(jph.jac(0, 1) == doctest::Approx(c).epsilon(1e-14));
  CHECK(jph.jac(1, 0) == 0.0);
  CHECK(jph.cojac(1, 0) == doctest::Approx(-c).epsilon(1e-14));

  const Mat fd = oracle::fd_jacobian(
      [&](const Vec& v) { return ph.apply(fh, TorusPoint(v)).coords(); },
      x.coords());
  CHECK((fd - jph.jac).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("standard map: unit determinant of the kick form") {
  const Model model = standard_map(10.0, 0.1);
  RngStream rng(5, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const MapInstance f = random_instance(model, rng);
    const JacobianPair jp =
        model.jacobian_pair(f, random_point(2, rng));
    CHECK(jp.det_jac == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("volume preservation across the zoo") {
  RngStream rng(23, 0);
  for (const Model& model : zoo()) {
    REQUIRE(model.volume_preserving());
    for (int rep = 0; rep < 2500; ++rep) {
      const MapInstance f = random_instance(model, rng);
      const JacobianPair jp =
          model.jacobian_pair(f, random_point(model.dimension(), rng));
      CHECK(std::fabs(std::fabs(jp.det_jac) - 1.0) < 1e-10);
      const Mat resid =
          jp.cojac * jp.jac.transpose() - Mat::Identity(2, 2);
      CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("chain rule: orbit Jacobian products match finite differences") {
  RngStream rng(31, 0);
  for (const Model& model : zoo()) {
    const DrivingMeasure mu = model.default_measure();
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 1 + int(rng.next_index(5));
      const Word w = sample_word(mu, n, rng.next_u64());
      const TorusPoint x0 = random_point(model.dimension(), rng);

      Mat prod = Mat::Identity(2, 2);
      TorusPoint x = x0;
      for (const auto& l : w.letters) {
        const MapInstance f = MapInstance::of(l);
        prod = model.jacobian_pair(f, x).jac * prod;
        x = model.apply(f, x);
      }
      // Keep the finite-difference increment well inside half a period so
      // the unwrap in the oracle stays valid, and small enough that the
      // composed word's third derivative does not pollute the quotient.
      const double h = prod.cwiseAbs().maxCoeff() > 50.0 ? 2e-10 : 1e-6;
      const Mat fd = oracle::fd_jacobian(
          [&](const Vec& v) { return model.apply_word(w, TorusPoint(v)).coords(); },
          x0.coords(), h);
      CHECK((fd - prod).cwiseAbs().maxCoeff() < 1e-5 * prod.cwiseAbs().maxCoeff() + 1e-5);
    }
  }
}

TEST_CASE("inverse consistency of jacobians along the orbit") {
  RngStream rng(37, 0);
  for (const Model& model : zoo()) {
    for (int rep = 0; rep < 500; ++rep) {
      const MapInstance f = random_instance(model, rng);
      MapInstance finv = f;
      finv.transform = MapTransform::Inverse;
      const TorusPoint x = random_point(model.dimension(), rng);
      const TorusPoint fx = model.apply(f, x);
      const Mat ji = model.jacobian_pair(finv, fx).jac;
      const Mat j = model.jacobian_pair(f, x).jac;
      CHECK((ji - j.inverse()).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("product lift: componentwise application and block Jacobian") {
  const Model lift = lift_product(cat_model(), 2);
  REQUIRE(lift.dimension() == 4);
  const MapInstance f{0, 0, false, MapTransform::Identity};
  Vec x(4);
  x << 0.5, 0.5, 0.1, 0.2;
  const TorusPoint y = lift.apply(f, TorusPoint(x));
  CHECK(y.coords()[0] == doctest::Approx(0.5));
  CHECK(y.coords()[1] == doctest::Approx(0.0));
  CHECK(y.coords()[2] == doctest::Approx(0.4));
  CHECK(y.coords()[3] == doctest::Approx(0.3));

  const JacobianPair jp = lift.jacobian_pair(f, TorusPoint(x));
  Mat a(2, 2);
  a << 2, 1, 1, 1;
  CHECK((jp.jac.topLeftCorner(2, 2) - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((jp.jac.bottomRightCorner(2, 2) - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK(jp.jac.topRightCorner(2, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(jp.det_jac == doctest::Approx(1.0));
}

TEST_CASE("product lift: cotangent norms restrict to one factor") {
  const Model base = cat_model();
  const Model lift = lift_product(base, 2);
  const MapInstance f{0, 0, false, MapTransform::Identity};
  Vec xi(2);
  xi << 0.6, -0.8;
  Vec lifted = Vec::Zero(4);
  lifted.head(2) = xi;
  const Vec pushed_base =
      base.jacobian_pair(f, pt(0, 0)).cojac * xi;
  const Vec pushed_lift =
      lift.jacobian_pair(f, TorusPoint(Vec::Zero(4))).cojac * lifted;
  CHECK(pushed_lift.norm() == doctest::Approx(pushed_base.norm()).epsilon(1e-15));
  CHECK(pushed_lift.tail(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("product lift: dimension cap") {
  CHECK_THROWS_AS(lift_product(cat_model(), 5), ConfigError);
}

TEST_CASE("block-shear family: registered table and exact inverses") {
  ModelConfig cfg;
  cfg.variant = ModelVariant::LinearCocycle;
  Mat b0(2, 2), b1(2, 2);
  b0 << 1, 2, 0, 1;
  b1 << 1, 0, 2, 1;
  cfg.block_shear = BlockShearSpec{{b0, b1}, 3, 10.0};
  const Model model = build_model(cfg);
  REQUIRE(model.dimension() == 4);
  REQUIRE(model.point_base());
  REQUIRE(model.map_count() == 9);  // 2^3 words + shear
  CHECK(model.volume_preserving());

  // Word id 6 = digits (0,1,1): step 0 applies b0, then b1, then b1.
  const MapInstance w{6, 0, false, MapTransform::Identity};
  const Mat jw = model.jacobian_pair(w, TorusPoint::zero(4)).jac;
  const Mat expected = b1 * (b1 * b0);
  CHECK((jw.topLeftCorner(2, 2) - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK((jw.bottomRightCorner(2, 2) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);

  const MapInstance shear{8, 0, false, MapTransform::Identity};
  const JacobianPair sp = model.jacobian_pair(shear, TorusPoint::zero(4));
  CHECK(sp.jac(2, 0) == 10.0);
  CHECK(sp.jac(3, 1) == 10.0);
  // Inverse-transpose pushes covectors: [[I, -L I], [0, I]].
  CHECK(sp.cojac(0, 2) == -10.0);
  CHECK(sp.cojac(1, 3) == -10.0);

  // The default measure is balanced: half the mass on the shear.
  const DrivingMeasure mu = model.default_measure();
  REQUIRE(mu.atoms.size() == 9);
  CHECK(mu.atoms.back().weight == doctest::Approx(0.5));

  for (int id = 0; id < model.map_count(); ++id) {
    const MapInstance fwd{id, 0, false, MapTransform::Identity};
    const MapInstance inv{id, 0, false, MapTransform::Inverse};
    const Mat prod = model.jacobian_pair(fwd, TorusPoint::zero(4)).jac *
                     model.jacobian_pair(inv, TorusPoint::zero(4)).jac;
    CHECK((prod - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("rational translation helper enumerates all shifts") {
  const ModelConfig cfg = rational_translation_config(2, 4);
  REQUIRE(cfg.matrices.size() == 16);
  const Model model = build_model(cfg);
  CHECK(model.map_count() == 16);
  const MapInstance f{5, 0, false, MapTransform::Identity};  // j = (1, 1)
  const TorusPoint y = model.apply(f, TorusPoint::zero(2));
  CHECK(y.coords()[0] == doctest::Approx(0.25));
  CHECK(y.coords()[1] == doctest::Approx(0.25));
}
