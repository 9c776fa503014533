#include "jam/objective.hpp"
#include "golden.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace jam;
using namespace jam::test;

TEST_CASE("average displacement") {
  Points2<double> a(2, 2), b(2, 2);
  a << 0, 0, 1, 1;
  b << 3, 4, 1, 1;
  CHECK(average_displacement(a, b) == doctest::Approx(2.5));
  CHECK_THROWS_AS(average_displacement(a, Points2<double>(3, 2)), std::invalid_argument);
}

TEST_CASE("best mode selection matches a brute-force scan") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int modes = 1 + static_cast<int>(rng.index(6));
    const int agents = 1 + static_cast<int>(rng.index(2));
    const int steps = 1 + static_cast<int>(rng.index(5));
    std::vector<Points2<double>> gt;
    for (int a = 0; a < agents; ++a) gt.push_back(random_matrix(rng, steps, 2, -5, 5));
    std::vector<std::vector<Points2<double>>> cand(static_cast<std::size_t>(modes));
    for (auto& m : cand) {
      for (int a = 0; a < agents; ++a) m.push_back(random_matrix(rng, steps, 2, -5, 5));
    }
    // Duplicate a mode now and then to exercise ties.
    if (modes > 2 && trial % 3 == 0) cand[2] = cand[1];
    const auto scope = agents == 1 ? ModeScope::Marginal : ModeScope::Joint;
    CHECK(select_best_mode(cand, gt, scope) == brute_best_mode(cand, gt));
  }
}

TEST_CASE("best mode ties resolve to the lowest index") {
  Points2<double> gt = Points2<double>::Zero(3, 2);
  Points2<double> off = Points2<double>::Constant(3, 2, 1.0);
  CHECK(select_best_mode({{off}, {gt}, {gt}}, {gt}, ModeScope::Marginal) == 1);
  CHECK(select_best_mode({{off, off}, {off, off}}, {gt, gt}, ModeScope::Joint) == 0);
  CHECK_THROWS(select_best_mode({}, {gt}, ModeScope::Marginal));
  CHECK_THROWS(select_best_mode({{gt}}, {gt, gt}, ModeScope::Marginal));
}

TEST_CASE("mixture likelihood matches the straight-line oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const NllCase c = random_nll_case(rng);
    const double expected = nll_oracle(c.agents, c.logits, c.gt, c.y_gt, c.k_star, c.modes_per_category);
    CHECK(std::abs(library_nll(c).value - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("only the selected mode receives trajectory gradients") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const NllCase c = random_nll_case(rng);
    const auto eval = library_nll(c);
    const int selected = c.y_gt * c.modes_per_category + c.k_star;
    for (std::size_t a = 0; a < c.agents.size(); ++a) {
      for (const auto& name : {"m" + std::to_string(a), "s" + std::to_string(a)}) {
        const Matrix& grad = eval.grads[static_cast<std::size_t>(eval.store.find(name))];
        for (Index r = 0; r < grad.rows(); ++r) {
          if (r == selected) {
            CHECK(grad.row(r).cwiseAbs().maxCoeff() > 0.0);
          } else {
            CHECK(grad.row(r).isZero(0.0));
          }
        }
      }
    }
    // With more than one mode every logit gets gradient through the normalizer.
    if (c.logits.cols() > 1) CHECK((eval.grads.back().array() != 0.0).all());
  }
}

namespace {

double scaled_diff(const Matrix& numeric, const Matrix& analytic) {
  return max_abs_diff(numeric, analytic) / std::max(1.0, analytic.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("mixture likelihood gradients match finite differences") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const NllCase c = random_nll_case(rng);
    const auto eval = library_nll(c);
    for (std::size_t a = 0; a < c.agents.size(); ++a) {
      auto with_means = [&](const Matrix& m) {
        NllCase d = c;
        d.agents[a].means = m;
        return nll_oracle(d.agents, d.logits, d.gt, d.y_gt, d.k_star, d.modes_per_category);
      };
      auto with_sigma = [&](const Matrix& s) {
        NllCase d = c;
        d.agents[a].sigma = s;
        return nll_oracle(d.agents, d.logits, d.gt, d.y_gt, d.k_star, d.modes_per_category);
      };
      CHECK(scaled_diff(numeric_gradient(with_means, c.agents[a].means), eval.grads[2 * a]) < 1e-6);
      CHECK(scaled_diff(numeric_gradient(with_sigma, c.agents[a].sigma, 1e-7), eval.grads[2 * a + 1]) < 1e-5);
    }
    auto with_logits = [&](const Matrix& l) {
      return nll_oracle(c.agents, l, c.gt, c.y_gt, c.k_star, c.modes_per_category);
    };
    CHECK(scaled_diff(numeric_gradient(with_logits, c.logits), eval.grads.back()) < 1e-5);
  }
}

TEST_CASE("targets carry the local ground truth and its category") {
  const ModelConfig cfg;
  GenerationOptions opt;
  opt.dims = cfg.dims;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = generate_scene(static_cast<ScenarioKind>(seed % 5), seed, opt);
    const auto t = make_targets(scene, cfg);
    for (std::size_t i = 0; i < 2; ++i) {
      const int a = scene.interacting[i];
      CHECK((t.gt[i] - to_local(scene.future_of(a), scene.current_pose(a))).cwiseAbs().maxCoeff() == 0.0);
      CHECK(t.category[i] == gt_category(t.gt[i], scene.agent_types[static_cast<std::size_t>(a)], cfg.scheme));
    }
  }
}

TEST_CASE("total loss is the equal-weight sum of the stage losses") {
  for (const auto v : {Variant::Jam, Variant::JointOneStep, Variant::MarginalAware, Variant::MarginalFree,
                       Variant::JamNoClass}) {
    CAPTURE(to_string(v));
    const ModelConfig cfg = apply_variant(ModelConfig{}, v);
    const Model model(cfg, 5);
    GenerationOptions opt;
    opt.dims = cfg.dims;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto scene = generate_scene(static_cast<ScenarioKind>(seed), seed, opt);
      Graph g(&model.parameters());
      const auto fp = model.forward(g, scene);
      const auto targets = make_targets(scene, cfg);
      const auto res = total_loss(g, fp, targets, cfg);
      const auto& p = res.parts;
      CHECK(p.total == doctest::Approx(p.nll1 + p.ce1 + p.nll2 + p.ce2).epsilon(1e-12));
      CHECK(std::isfinite(p.total));
      if (fp.marginal) {
        for (std::size_t i = 0; i < 2; ++i) {
          CHECK(res.stage1_modes[i] / cfg.k_m == targets.category[i]);
        }
      }
      if (fp.joint) {
        CHECK(res.stage2_mode >= 0);
        CHECK(res.stage2_mode < cfg.k_j);
      } else {
        CHECK(p.nll2 == 0.0);
        CHECK(p.ce2 == 0.0);
      }
    }
  }
}

TEST_CASE("hand-evaluated likelihood") {
  // sigma 1, offset (1, 0), two equal logits, one step: 0.5 + log 2.
  NllCase c;
  c.agents.push_back({Matrix::Zero(2, 2), Matrix::Ones(2, 2)});
  c.gt.push_back(Points2<double>(1, 2));
  c.gt[0] << 1.0, 0.0;
  c.logits = Matrix::Zero(1, 2);
  c.categories = 2;
  CHECK(library_nll(c).value == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-15));
  CHECK(library_nll(c).value == doctest::Approx(1.1931).epsilon(1e-4));
}

TEST_CASE("micro loss matches the frozen reference") {
  const ModelConfig cfg;
  const Model model(cfg, 77);
  GenerationOptions opt;
  opt.dims = cfg.dims;
  const auto scene = generate_scene(ScenarioKind::Crossing, 77, opt);
  Graph g(&model.parameters());
  const auto res = total_loss(g, model.forward(g, scene), make_targets(scene, cfg), cfg);
  Matrix parts(1, 5);
  parts << res.parts.nll1, res.parts.ce1, res.parts.nll2, res.parts.ce2, res.parts.total;
  check_golden("micro_loss", parts);
}
