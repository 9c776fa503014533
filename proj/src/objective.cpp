#include "jam/objective.hpp"

#include <limits>
#include <stdexcept>

namespace jam {

double average_displacement(const Points2<double>& a, const Points2<double>& b) {
  if (a.rows() != b.rows() || a.rows() == 0) throw std::invalid_argument("average_displacement: length mismatch");
  return (a - b).rowwise().norm().mean();
}

int select_best_mode(const std::vector<std::vector<Points2<double>>>& modes, const std::vector<Points2<double>>& gt,
                     ModeScope scope) {
  if (modes.empty()) throw std::invalid_argument("select_best_mode: no modes");
  if (scope == ModeScope::Marginal && gt.size() != 1) {
    throw std::invalid_argument("select_best_mode: marginal scope takes one agent");
  }
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (modes[m].size() != gt.size()) throw std::invalid_argument("select_best_mode: agent count mismatch");
    double err = 0.0;
    for (std::size_t a = 0; a < gt.size(); ++a) err += average_displacement(modes[m][a], gt[a]);
    if (err < best_err) {
      best_err = err;
      best = static_cast<int>(m);
    }
  }
  return best;
}

Points2<double> mode_means(const Matrix& means, Index mode) {
  return Eigen::Map<const Points2<double>>(means.row(mode).data(), means.cols() / 2, 2);
}

Var gaussian_nll(Var means, Var sigma, Index mode, const Points2<double>& gt) {
  Graph& g = means.graph();
  const Index t2 = means.cols();
  if (gt.rows() * 2 != t2) throw ShapeError("gaussian_nll: ground truth length mismatch");
  Matrix target(1, t2);
  for (Index t = 0; t < gt.rows(); ++t) {
    target(0, 2 * t) = gt(t, 0);
    target(0, 2 * t + 1) = gt(t, 1);
  }
  const Var s = slice_rows(sigma, mode, 1);
  const Var z = div(sub(slice_rows(means, mode, 1), g.constant(std::move(target))), s);
  return add(sum(log(s)), scale(sum(square(z)), 0.5));
}

Var mode_cross_entropy(Var logits, Index target) { return neg(pick(log_softmax_rows(logits), 0, target)); }

NllTerms nll_gmm(const std::vector<GmmModes>& agents, Var logits, const std::vector<Points2<double>>& gt, Index mode) {
  if (agents.empty() || agents.size() != gt.size()) throw std::invalid_argument("nll_gmm: agent count mismatch");
  if (mode < 0 || mode >= logits.cols()) throw std::invalid_argument("nll_gmm: mode index out of range");
  NllTerms terms;
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const Var term = gaussian_nll(agents[a].means, agents[a].sigma, mode, gt[a]);
    terms.regression = a == 0 ? term : add(terms.regression, term);
  }
  terms.classification = mode_cross_entropy(logits, mode);
  terms.total = add(terms.regression, terms.classification);
  return terms;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  nll1 += o.nll1;
  ce1 += o.ce1;
  nll2 += o.nll2;
  ce2 += o.ce2;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const { return {nll1 * s, ce1 * s, nll2 * s, ce2 * s, total * s}; }

LossTargets make_targets(const SceneSample& scene, const ModelConfig& cfg, const AnchorSet* anchors) {
  LossTargets t;
  for (std::size_t i = 0; i < 2; ++i) {
    const int a = scene.interacting[i];
    t.gt[i] = to_local(scene.future_of(a), scene.current_pose(a));
    t.category[i] = gt_category(t.gt[i], scene.agent_types[static_cast<std::size_t>(a)], cfg.scheme, anchors);
  }
  return t;
}

namespace {

int joint_best(const JointHeads& heads, const LossTargets& targets) {
  std::vector<std::vector<Points2<double>>> modes(static_cast<std::size_t>(heads.logits.cols()));
  for (std::size_t m = 0; m < modes.size(); ++m) {
    for (std::size_t i = 0; i < 2; ++i) modes[m].push_back(mode_means(heads.means[i].value(), Index(m)));
  }
  return select_best_mode(modes, {targets.gt[0], targets.gt[1]}, ModeScope::Joint);
}

NllTerms joint_terms(const JointHeads& heads, const LossTargets& targets, int mode) {
  return nll_gmm({{heads.means[0], heads.sigma[0]}, {heads.means[1], heads.sigma[1]}}, heads.logits,
                 {targets.gt[0], targets.gt[1]}, mode);
}

}  // namespace

LossResult total_loss(Graph& g, const ForwardPass& fp, const LossTargets& targets, const ModelConfig& cfg) {
  LossResult res;
  std::vector<Var> parts;
  if (fp.marginal) {
    const auto& m = *fp.marginal;
    Var nll, ce;
    for (std::size_t i = 0; i < 2; ++i) {
      const int y = targets.category[i];
      if (y < 0 || y >= cfg.y_m) throw std::invalid_argument("total_loss: category out of range");
      std::vector<std::vector<Points2<double>>> candidates;
      for (int k = 0; k < cfg.k_m; ++k) candidates.push_back({mode_means(m.means[i].value(), Index(y) * cfg.k_m + k)});
      const ModeAssignment assignment{y, select_best_mode(candidates, {targets.gt[i]}, ModeScope::Marginal)};
      const int flat = assignment.flat(cfg.k_m);
      res.stage1_modes[i] = flat;
      const NllTerms terms = nll_gmm({{m.means[i], m.sigma[i]}}, m.logits[i], {targets.gt[i]}, flat);
      nll = i == 0 ? terms.regression : add(nll, terms.regression);
      ce = i == 0 ? terms.classification : add(ce, terms.classification);
    }
    res.parts.nll1 = nll.scalar();
    res.parts.ce1 = ce.scalar();
    parts.push_back(nll);
    parts.push_back(ce);
  }
  if (fp.proposer) {
    const int best = joint_best(*fp.proposer, targets);
    res.stage1_modes = {best, best};
    const NllTerms terms = joint_terms(*fp.proposer, targets, best);
    res.parts.nll1 = terms.regression.scalar();
    res.parts.ce1 = terms.classification.scalar();
    parts.push_back(terms.regression);
    parts.push_back(terms.classification);
  }
  if (fp.joint) {
    res.stage2_mode = joint_best(*fp.joint, targets);
    const NllTerms terms = joint_terms(*fp.joint, targets, res.stage2_mode);
    res.parts.nll2 = terms.regression.scalar();
    res.parts.ce2 = terms.classification.scalar();
    parts.push_back(terms.regression);
    parts.push_back(terms.classification);
  }
  if (parts.empty()) throw std::invalid_argument("total_loss: forward pass has no outputs");
  res.total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) res.total = add(res.total, parts[i]);
  res.parts.total = res.total.scalar();
  (void)g;
  return res;
}

}  // namespace jam
