#include "jam/scene.hpp"
#include "jam/taxonomy.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace jam;

namespace {

double closest_approach(const SceneSample& s) {
  const auto a = s.future_of(s.interacting[0]);
  const auto b = s.future_of(s.interacting[1]);
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) best = std::min(best, (a.row(i) - b.row(j)).norm());
  }
  return best;
}

double speed_limit(AgentType t) {
  switch (t) {
    case AgentType::Vehicle: return 30.0;
    case AgentType::Pedestrian: return 3.0;
    case AgentType::Cyclist: return 12.0;
  }
  return 0.0;
}

Dataset small_dataset(int n, std::uint64_t seed) {
  DatasetSpec spec;
  spec.scenes = n;
  spec.dims = SceneDims::micro();
  spec.mix = parse_kind_mix("crossing:0.5,follow:0.5");
  spec.uturn_rate = 0.3;
  return generate_dataset(spec, seed);
}

}  // namespace

TEST_CASE("generation is deterministic per kind and seed") {
  for (int k = 0; k < kScenarioKindCount; ++k) {
    const auto kind = static_cast<ScenarioKind>(k);
    CHECK(generate_scene(kind, 9) == generate_scene(kind, 9));
    CHECK(!(generate_scene(kind, 9) == generate_scene(kind, 10)));
  }
  CHECK_THROWS_AS(generate_scene(static_cast<ScenarioKind>(17), 1), std::invalid_argument);
  CHECK_THROWS_AS(parse_scenario_kind("roundabout"), std::invalid_argument);
}

TEST_CASE("scene invariants hold across kinds, seeds and U-turns") {
  for (const bool uturn : {false, true}) {
    GenerationOptions opt;
    opt.uturn = uturn;
    for (int k = 0; k < kScenarioKindCount; ++k) {
      for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto s = generate_scene(static_cast<ScenarioKind>(k), seed, opt);
        CAPTURE(k);
        CAPTURE(seed);
        CAPTURE(uturn);
        const auto& d = s.dims;
        CHECK(s.interacting[0] != s.interacting[1]);
        CHECK(closest_approach(s) < 10.0);
        CHECK(s.low_probability_maneuver == uturn);
        CHECK(s.histories.allFinite());
        CHECK(s.futures.allFinite());
        for (int a = 0; a < d.agents; ++a) {
          for (int t = 0; t < d.history; ++t) {
            if (!s.step_valid(a, t)) CHECK(s.histories.row(s.history_row(a, t)).isZero(0.0));
          }
        }
        const double dt = 1.0 / d.sample_rate_hz;
        for (const int a : s.interacting) {
          for (int t = 0; t < d.history; ++t) CHECK(s.step_valid(a, t));
          // Speed and acceleration from the position sequence.
          const auto f = s.future_of(a);
          Points2<double> p(d.history + d.future, 2);
          for (int t = 0; t < d.history; ++t) p.row(t) = s.histories.block(s.history_row(a, t), 0, 1, 2);
          p.bottomRows(d.future) = f;
          const double limit = speed_limit(s.agent_types[static_cast<std::size_t>(a)]);
          for (Index t = 1; t < p.rows(); ++t) CHECK((p.row(t) - p.row(t - 1)).norm() / dt <= limit + 1e-3);
          for (Index t = 2; t < p.rows(); ++t) {
            CHECK((p.row(t) - 2.0 * p.row(t - 1) + p.row(t - 2)).norm() / (dt * dt) <= 8.0 + 0.05);
          }
          for (int t = 0; t < d.history; ++t) {
            const auto r = s.history_row(a, t);
            const Eigen::Vector2d v(s.histories(r, kStateVx), s.histories(r, kStateVy));
            if (v.norm() <= 0.5) continue;
            CHECK(std::abs(wrap_angle(std::atan2(v.y(), v.x()) - s.histories(r, kStateHeading))) < 0.2);
          }
          // Heading against the displacement over the following step.
          for (Index t = 0; t + 1 < p.rows() && t < d.history; ++t) {
            const Eigen::Vector2d step = (p.row(t + 1) - p.row(t)).transpose();
            if (step.norm() / dt <= 0.5) continue;
            const double heading = s.histories(s.history_row(a, static_cast<int>(t)), kStateHeading);
            CHECK(std::abs(wrap_angle(std::atan2(step.y(), step.x()) - heading)) < 0.2);
          }
        }
      }
    }
  }
}

TEST_CASE("follow scenes keep the follower behind the leader") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto s = generate_scene(ScenarioKind::Follow, seed);
    const int follower = s.interacting[0], leader = s.interacting[1];
    const Pose2d lane = s.current_pose(leader);
    const auto fa = to_local(s.future_of(follower), lane);
    const auto fb = to_local(s.future_of(leader), lane);
    for (Index t = 0; t < fa.rows(); ++t) CHECK(fa(t, 0) < fb(t, 0));
  }
}

TEST_CASE("datasets follow the kind mix and U-turn rate") {
  DatasetSpec spec;
  spec.scenes = 100;
  spec.dims = SceneDims::micro();
  spec.mix = {{ScenarioKind::Crossing, 1.0}};
  for (const auto& s : generate_dataset(spec, 3).scenes) CHECK(s.kind == ScenarioKind::Crossing);

  spec.scenes = 1000;
  spec.mix = parse_kind_mix("crossing:0.2,merge:0.2,yield:0.2,follow:0.2,turn-conflict:0.2");
  spec.uturn_rate = 0.1;
  const auto ds = generate_dataset(spec, 4);
  int uturns = 0;
  for (const auto& s : ds.scenes) {
    bool labelled = false;
    for (const int a : s.interacting) {
      const auto c = classify_trajectory(to_local(s.future_of(a), s.current_pose(a)));
      labelled |= c == BehaviorCategory::LeftUTurn || c == BehaviorCategory::RightUTurn;
    }
    uturns += labelled ? 1 : 0;
  }
  CHECK(uturns >= 80);
  CHECK(uturns <= 120);

  CHECK(!(generate_dataset(spec, 4).scenes == generate_dataset(spec, 5).scenes));
  spec.mix = {{ScenarioKind::Crossing, 0.5}, {ScenarioKind::Merge, 0.4}};
  CHECK_THROWS_AS(generate_dataset(spec, 1), std::invalid_argument);
  CHECK_THROWS_AS(parse_kind_mix("crossing"), std::invalid_argument);
}

TEST_CASE("dataset files round trip bitwise") {
  const auto ds = small_dataset(10, 7);
  const auto bytes = encode_dataset(ds);
  const auto back = decode_dataset(bytes);
  CHECK(back.scenes == ds.scenes);
  CHECK(back.header.seed == ds.header.seed);
  CHECK(encode_dataset(back) == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "jam_test_scene.jamd").string();
  write_dataset(path, ds);
  CHECK(encode_dataset(read_dataset(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("corrupted dataset files raise structured errors") {
  const auto bytes = encode_dataset(small_dataset(3, 8));
  auto expect = [](std::vector<std::uint8_t> b, DatasetError::Code code, const std::string& field) {
    try {
      (void)decode_dataset(b);
      FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
      CHECK(e.code == code);
      CHECK(e.field == field);
    }
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect(bad_magic, DatasetError::Code::BadMagic, "magic");

  auto bad_version = bytes;
  bad_version[4] = 9;
  expect(bad_version, DatasetError::Code::VersionMismatch, "version");

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  expect(flipped, DatasetError::Code::Checksum, "crc32");

  auto truncated = bytes;
  truncated.resize(truncated.size() - 7);
  expect(truncated, DatasetError::Code::Truncated, "payload");

  auto miscount = bytes;
  miscount[8] = 2;  // scenes field
  expect(miscount, DatasetError::Code::CountMismatch, "scenes");

  expect(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 20), DatasetError::Code::Truncated, "header");
}
