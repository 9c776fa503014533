#include "jam/geometry.hpp"
#include "jam/model.hpp"
#include "jam/random.hpp"
#include "jam/scene.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace jam;
using std::numbers::pi;

namespace {

Pose2d random_pose(Rng& rng) { return Pose2d(rng.uniform(-200, 200), rng.uniform(-200, 200), rng.uniform(-pi, pi)); }

RigidTransform2d random_transform(Rng& rng) {
  RigidTransform2d g;
  g.rotation = rng.uniform(-pi, pi);
  g.translation = Eigen::Vector2d(rng.uniform(-300, 300), rng.uniform(-300, 300));
  return g;
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi] and preserves the angle mod 2pi") {
  Rng rng(1);
  CHECK(wrap_angle(pi) == pi);
  CHECK(wrap_angle(-pi) == pi);
  CHECK(wrap_angle(3 * pi) == doctest::Approx(pi));
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::cos(w) == doctest::Approx(std::cos(a)).epsilon(1e-9));
    CHECK(std::sin(w) == doctest::Approx(std::sin(a)).epsilon(1e-9));
  }
  CHECK(Pose2d(0, 0, 7.0).heading == doctest::Approx(7.0 - 2 * pi));
}

TEST_CASE("to_local spot values") {
  Points2<double> p(1, 2);
  p << 1.0, 0.0;
  const auto l = to_local(p, Pose2d(0, 0, pi / 2));
  CHECK(l(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(l(0, 1) == doctest::Approx(-1.0));
  const auto back = to_global(l, Pose2d(0, 0, pi / 2));
  CHECK(back(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(back(0, 1)) < 1e-15);

  Points2<double> o(1, 2);
  o << 3.0, -4.0;
  CHECK(to_local(o, Pose2d(3.0, -4.0, 1.2)).isZero(1e-15));
  CHECK(to_local(o, Pose2d()) == o);
  CHECK(to_global(o, Pose2d()) == o);
}

TEST_CASE("to_local and to_global are inverse for 1000 random poses") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const Pose2d origin = random_pose(rng);
    Points2<double> p(3, 2);
    for (Index r = 0; r < 3; ++r) p.row(r) << rng.uniform(-500, 500), rng.uniform(-500, 500);
    CHECK((to_global(to_local(p, origin), origin) - p).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((to_local(to_global(p, origin), origin) - p).cwiseAbs().maxCoeff() < 1e-9);
    // The origin heading maps to +x.
    Points2<double> ahead(1, 2);
    ahead << origin.x + 2.0 * std::cos(origin.heading), origin.y + 2.0 * std::sin(origin.heading);
    const auto l = to_local(ahead, origin);
    CHECK(l(0, 0) == doctest::Approx(2.0));
    CHECK(std::abs(l(0, 1)) < 1e-9);
  }
}

TEST_CASE("rigid transforms compose with their inverse to the identity") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto g = random_transform(rng);
    const auto h = random_transform(rng);
    const Eigen::Vector2d p(rng.uniform(-100, 100), rng.uniform(-100, 100));
    CHECK((g.inverse().apply_point(g.apply_point(p)) - p).norm() < 1e-9);
    CHECK(((g * g.inverse()).apply_point(p) - p).norm() < 1e-9);
    CHECK(((g * h).apply_point(p) - g.apply_point(h.apply_point(p))).norm() < 1e-9);
    const Pose2d pose = random_pose(rng);
    const Pose2d moved = g.apply(pose);
    CHECK(std::abs(wrap_angle(moved.heading - pose.heading - g.rotation)) < 1e-12);
  }
}

TEST_CASE("encode_origin spot values against the sinusoid formula") {
  // Relative pose (1, 2, pi/4) at dim 8: channels x, y, cos, sin in band 1.
  const Pose2d anchor(0, 0, 0);
  const Pose2d origin(1.0, 2.0, pi / 4);
  const auto e = encode_origin(origin, anchor, 8);
  const double wp = pi / 64.0, wh = pi / 2.0;
  const double c = std::cos(pi / 4), s = std::sin(pi / 4);
  const double want[8] = {std::sin(wp * 1.0), std::cos(wp * 1.0), std::sin(wp * 2.0), std::cos(wp * 2.0),
                          std::sin(wh * c),   std::cos(wh * c),   std::sin(wh * s),   std::cos(wh * s)};
  REQUIRE(e.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(e(i) == doctest::Approx(want[i]).epsilon(1e-15));

  // Second band doubles the frequency.
  const auto e16 = encode_origin(origin, anchor, 16);
  CHECK(e16(8) == doctest::Approx(std::sin(2 * wp * 1.0)));
  CHECK(e16(15) == doctest::Approx(std::cos(2 * wh * s)));
  CHECK_THROWS_AS(encode_origin(origin, anchor, 7), std::invalid_argument);
}

TEST_CASE("encode_origin is bounded and invariant to a shared rigid motion") {
  Rng rng(4);
  const auto zero = encode_origin(Pose2d(), Pose2d(), 32);
  for (int i = 0; i < 200; ++i) {
    const Pose2d origin = random_pose(rng), anchor = random_pose(rng);
    const auto g = random_transform(rng);
    const auto e = encode_origin(origin, anchor, 32);
    CHECK(e.cwiseAbs().maxCoeff() <= 1.0);
    CHECK((encode_origin(g.apply(origin), g.apply(anchor), 32) - e).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((encode_origin(anchor, anchor, 32) - zero).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rigid_transform_scene identity, inverse and half-turn") {
  GenerationOptions opt;
  opt.dims = SceneDims::micro();
  const SceneSample s = generate_scene(ScenarioKind::Crossing, 5, opt);
  CHECK(rigid_transform_scene(s, RigidTransform2d::identity()) == s);

  Rng rng(5);
  const auto g = random_transform(rng);
  const SceneSample back = rigid_transform_scene(rigid_transform_scene(s, g), g.inverse());
  CHECK((back.histories - s.histories).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((back.futures - s.futures).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((back.map - s.map).cwiseAbs().maxCoeff() < 1e-9);

  RigidTransform2d half;
  half.rotation = pi;
  const SceneSample flipped = rigid_transform_scene(s, half);
  for (const int a : s.interacting) {
    CHECK((flipped.future_of(a) + s.future_of(a)).cwiseAbs().maxCoeff() < 1e-9);
  }
  // Validity flags never change.
  CHECK((flipped.histories.col(kStateValid) - s.histories.col(kStateValid)).isZero(0.0));
  CHECK((flipped.map.col(kPointType) - s.map.col(kPointType)).isZero(0.0));
}

TEST_CASE("encoder inputs are invariant under rigid scene transforms") {
  Rng rng(6);
  const ModelConfig cfg;
  GenerationOptions opt;
  opt.dims = cfg.dims;
  for (int i = 0; i < 20; ++i) {
    const auto s = generate_scene(static_cast<ScenarioKind>(i % kScenarioKindCount), 40 + i, opt);
    const auto g = random_transform(rng);
    const auto a = extract_features(s, cfg);
    const auto b = extract_features(rigid_transform_scene(s, g), cfg);
    CHECK((a.history - b.history).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.map_points - b.map_points).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.agent_origin - b.agent_origin).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.element_origin - b.element_origin).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(a.point_valid == b.point_valid);
    CHECK(a.element_valid == b.element_valid);
  }
}
