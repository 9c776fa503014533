#include "jam/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace jam;
using namespace jam::test;

TEST_CASE("thresholds") {
  ThresholdTable t;
  CHECK_NOTHROW(t.validate());
  CHECK(t.steps(0, 10.0, 80) == 30);
  CHECK(t.steps(2, 10.0, 80) == 80);
  CHECK(t.steps(1, 2.0, 16) == 10);
  CHECK(t.steps(2, 2.0, 10) == 10);
  t.meters[1] = 1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = ThresholdTable{};
  t.meters[0] = 0.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("displacement metrics match brute force") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const int steps = 1 + static_cast<int>(rng.index(6));
    const auto gt = random_pair(rng, steps);
    const auto pred = random_prediction(rng, gt, 1 + static_cast<int>(rng.index(6)), 4.0);
    const int horizon = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(steps)));
    const double threshold = rng.uniform(0.5, 4.0);
    const auto ref = brute_metrics(pred, gt, horizon, threshold);
    CHECK(min_ade_joint(pred, gt, horizon) == doctest::Approx(ref.min_ade).epsilon(1e-12));
    CHECK(min_fde_joint(pred, gt, horizon) == doctest::Approx(ref.min_fde).epsilon(1e-12));
    CHECK(scene_hit(pred, gt, horizon, threshold) == ref.hit);
  }
}

TEST_CASE("miss rate counts scenes with no hitting mode") {
  Rng rng(32);
  std::vector<EvalItem> items;
  int misses = 0;
  for (int i = 0; i < 300; ++i) {
    EvalItem it;
    it.gt = random_pair(rng, 4);
    it.prediction = random_prediction(rng, it.gt, 3, 3.0);
    misses += brute_metrics(it.prediction, it.gt, 4, 2.0).hit ? 0 : 1;
    items.push_back(std::move(it));
  }
  CHECK(miss_rate_joint(items, 4, 2.0) == static_cast<double>(misses) / 300.0);
  CHECK_THROWS(miss_rate_joint({}, 4, 2.0));
}

TEST_CASE("a ground-truth prediction scores perfectly") {
  GenerationOptions opt;
  opt.dims = SceneDims::micro();
  std::vector<EvalItem> items;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto scene = generate_scene(static_cast<ScenarioKind>(seed % 5), seed, opt);
    JointPrediction pred;
    JointMode m;
    for (std::size_t i = 0; i < 2; ++i) {
      m.steps[i] = Matrix::Ones(opt.dims.future, 4);
      m.steps[i].leftCols(2) = scene.future_of(scene.interacting[i]);
    }
    m.score = 1.0;
    pred.modes.push_back(m);
    items.push_back(make_eval_item(scene, pred));
  }
  const auto rows = compute_metrics(items, ThresholdTable{}, opt.dims.sample_rate_hz, "oracle");
  for (const auto& r : rows) {
    CHECK(r.min_ade == 0.0);
    CHECK(r.min_fde == 0.0);
    CHECK(r.miss_rate == 0.0);
    CHECK(r.map == 1.0);
    CHECK(r.soft_map == 1.0);
  }
}

TEST_CASE("average precision on hand-enumerated outcome lists") {
  CHECK(average_precision({1, 0, 1, 0}, 2) == doctest::Approx((6.0 + 5.0 * 2.0 / 3.0) / 11.0).epsilon(1e-15));
  CHECK(average_precision({1}, 1) == 1.0);
  CHECK(average_precision({0, 0}, 1) == 0.0);
  CHECK(average_precision({}, 3) == 0.0);
  CHECK(average_precision({0, 1}, 1) == doctest::Approx(0.5));
  CHECK_THROWS(average_precision({1}, 0));
}

TEST_CASE("mAP fixtures") {
  for (const auto& f : ap_fixtures()) {
    CAPTURE(f.name);
    const auto s = map_score(f.items, 1, 1.0);
    CHECK(s.map == doctest::Approx(f.map).epsilon(1e-14));
    CHECK(s.soft_map == doctest::Approx(f.soft_map).epsilon(1e-14));
  }
}

TEST_CASE("metric table structure and aggregation") {
  Rng rng(33);
  std::vector<EvalItem> items;
  for (int i = 0; i < 30; ++i) {
    EvalItem it;
    it.gt = random_pair(rng, 16);
    it.prediction = random_prediction(rng, it.gt, 3, 3.0);
    it.types = {static_cast<AgentType>(i % 3), AgentType::Vehicle};
    it.category = i % 4;
    items.push_back(std::move(it));
  }
  const auto rows = compute_metrics(items, ThresholdTable{}, 2.0, "m");
  REQUIRE(rows.size() == 12);
  CHECK(rows[0].agent_type == "vehicle");
  CHECK(rows[0].scenes == 30);
  CHECK(rows[3].agent_type == "pedestrian");
  CHECK(rows[3].scenes == 10);
  CHECK(rows[9].agent_type == "all");
  CHECK(rows[9].horizon == "3");
  CHECK(rows[11].horizon == "8");
  const auto agg = aggregate_table(rows);
  REQUIRE(agg.size() == 4);
  CHECK(agg.back().agent_type == "all(avg)");
  double ade = 0.0;
  for (int i = 0; i < 9; ++i) ade += rows[static_cast<std::size_t>(i)].min_ade;
  CHECK(agg.back().min_ade == doctest::Approx(ade / 9.0));
  const auto pooled = pooled_summary(rows);
  CHECK(pooled.min_ade == doctest::Approx((rows[9].min_ade + rows[10].min_ade + rows[11].min_ade) / 3.0));
  std::vector<MetricsRow> broken(rows.begin(), rows.begin() + 5);
  CHECK_THROWS_AS(aggregate_table(broken), std::invalid_argument);
  CHECK_THROWS(aggregate_table({}));
  CHECK_THROWS(compute_metrics({}, ThresholdTable{}, 2.0, "m"));
}

TEST_CASE("metrics CSV round trips losslessly") {
  Rng rng(34);
  std::vector<MetricsRow> rows;
  for (int i = 0; i < 20; ++i) {
    MetricsRow r{"jam", "cyclist", "5", i, rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(), rng.uniform(), rng.uniform()};
    r.min_ade = std::nextafter(r.min_ade, 100.0);
    rows.push_back(r);
  }
  std::stringstream ss;
  write_metrics_csv(ss, rows);
  CHECK(read_metrics_csv(ss) == rows);
  std::stringstream bad("model,x\n");
  CHECK_THROWS(read_metrics_csv(bad));
  std::stringstream short_row("model,agent_type,horizon,scenes,min_ade,min_fde,miss_rate,map,soft_map\njam,all,3\n");
  CHECK_THROWS(read_metrics_csv(short_row));
  MetricsRow comma{"a,b", "all", "3"};
  std::stringstream out;
  CHECK_THROWS(write_metrics_csv(out, {comma}));
}

TEST_CASE("miss rate on a constructed ten-scene set") {
  // Scenes 0, 3, 6, 9 only place one agent within the threshold, so they miss.
  std::vector<EvalItem> items;
  for (int i = 0; i < 10; ++i) {
    EvalItem it = ap_item(0, {{0.5, true}, {0.5, false}});
    if (i % 3 == 0) it.prediction.modes[0].steps[1](0, 0) = 3.0;
    items.push_back(std::move(it));
  }
  CHECK(miss_rate_joint(items, 1, 1.0) == 0.4);
  CHECK(miss_rate_joint(items, 1, 3.0) == 0.0);
  CHECK(miss_rate_joint(items, 1, 0.4) == 1.0);
}

TEST_CASE("aggregation of a hand-built three by three grid") {
  std::vector<MetricsRow> rows;
  const char* types[] = {"vehicle", "pedestrian", "cyclist"};
  const char* horizons[] = {"3", "5", "8"};
  for (int t = 0; t < 3; ++t) {
    for (int h = 0; h < 3; ++h) {
      MetricsRow r;
      r.model = "m";
      r.agent_type = types[t];
      r.horizon = horizons[h];
      r.scenes = 10 * (t + 1);
      r.min_ade = 10.0 * t + h;
      r.min_fde = 2.0 * r.min_ade;
      r.miss_rate = 0.1 * (t + 1);
      r.map = 0.25 * h;
      r.soft_map = 0.5;
      rows.push_back(r);
    }
  }
  const auto agg = aggregate_table(rows);
  REQUIRE(agg.size() == 4);
  CHECK(agg[0].agent_type == "vehicle(avg)");
  CHECK(agg[0].min_ade == 1.0);
  CHECK(agg[1].min_ade == 11.0);
  CHECK(agg[2].min_ade == 21.0);
  CHECK(agg[2].min_fde == 42.0);
  CHECK(agg[1].miss_rate == doctest::Approx(0.2));
  CHECK(agg[0].map == doctest::Approx(0.25));
  CHECK(agg[3].agent_type == "all(avg)");
  CHECK(agg[3].min_ade == 11.0);
  CHECK(agg[3].miss_rate == doctest::Approx(0.2));
  CHECK(agg[3].scenes == 20);
  CHECK(agg[3].soft_map == 0.5);
}

TEST_CASE("metric invariants: soft mAP dominates, rigid motion and duplicated modes change nothing") {
  Rng rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalItem> items;
    for (int i = 0; i < 12; ++i) {
      EvalItem it;
      it.gt = random_pair(rng, 6);
      it.prediction = random_prediction(rng, it.gt, 4, 3.0);
      it.category = static_cast<int>(rng.index(3));
      items.push_back(std::move(it));
    }
    const auto base = map_score(items, 6, 2.5);
    CHECK(base.soft_map >= base.map);

    RigidTransform2d g;
    g.rotation = rng.uniform(-3.0, 3.0);
    g.translation = Eigen::Vector2d(rng.uniform(-100, 100), rng.uniform(-100, 100));
    auto moved = items;
    auto doubled = items;
    for (auto& it : moved) {
      for (auto& gt : it.gt) {
        for (Index t = 0; t < gt.rows(); ++t) gt.row(t) = g.apply_point(gt.row(t).transpose()).transpose();
      }
      for (auto& m : it.prediction.modes) {
        for (auto& s : m.steps) {
          for (Index t = 0; t < s.rows(); ++t) s.block(t, 0, 1, 2) = g.apply_point(s.block(t, 0, 1, 2).transpose()).transpose();
        }
      }
    }
    for (auto& it : doubled) {
      const auto modes = it.prediction.modes;
      it.prediction.modes.insert(it.prediction.modes.end(), modes.begin(), modes.end());
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& a = items[i];
      const auto& b = moved[i];
      const auto& c = doubled[i];
      CHECK(std::abs(min_ade_joint(a.prediction, a.gt, 6) - min_ade_joint(b.prediction, b.gt, 6)) < 1e-9);
      CHECK(std::abs(min_fde_joint(a.prediction, a.gt, 6) - min_fde_joint(b.prediction, b.gt, 6)) < 1e-9);
      CHECK(min_ade_joint(a.prediction, a.gt, 6) == min_ade_joint(c.prediction, c.gt, 6));
      CHECK(min_fde_joint(a.prediction, a.gt, 6) == min_fde_joint(c.prediction, c.gt, 6));
    }
    CHECK(miss_rate_joint(items, 6, 2.5) == miss_rate_joint(doubled, 6, 2.5));
    CHECK(miss_rate_joint(items, 6, 2.5) == miss_rate_joint(moved, 6, 2.5));
    const auto moved_ap = map_score(moved, 6, 2.5);
    CHECK(std::abs(moved_ap.map - base.map) < 1e-9);
    CHECK(std::abs(moved_ap.soft_map - base.soft_map) < 1e-9);
  }
}
