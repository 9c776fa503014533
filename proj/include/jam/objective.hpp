#pragma once

#include "jam/model.hpp"
#include "jam/taxonomy.hpp"

#include <array>
#include <vector>

namespace jam {

enum class ModeScope { Marginal, Joint };

/// Mean Euclidean distance between two equally long trajectories.
double average_displacement(const Points2<double>& a, const Points2<double>& b);

/// modes[m][agent] are T x 2 mean trajectories, gt[agent] the targets.
/// Marginal scope expects one agent; joint scope sums the per-agent average
/// displacement. Ties go to the lowest index.
int select_best_mode(const std::vector<std::vector<Points2<double>>>& modes, const std::vector<Points2<double>>& gt,
                     ModeScope scope);

/// Row `mode` of an interleaved (modes x 2T) matrix as T x 2 points.
Points2<double> mode_means(const Matrix& means, Index mode);

struct ModeAssignment {
  int y_gt = 0;
  int k_star = 0;
  /// Index into the flattened category-major mode axis.
  int flat(int modes_per_category) const { return y_gt * modes_per_category + k_star; }
};

/// One agent's mixture: (modes x 2T) means in meters and sigmas.
struct GmmModes {
  Var means;
  Var sigma;
};

/// sum_t [log sx + log sy + ((dx/sx)^2 + (dy/sy)^2) / 2] for one mode.
Var gaussian_nll(Var means, Var sigma, Index mode, const Points2<double>& gt);
/// -log softmax(logits)[target] for a 1 x modes row.
Var mode_cross_entropy(Var logits, Index target);

struct NllTerms {
  Var regression;
  Var classification;
  Var total;
};

/// Negative log-likelihood of the selected mode summed over agents, plus the
/// score term as cross-entropy against the selected index.
NllTerms nll_gmm(const std::vector<GmmModes>& agents, Var logits, const std::vector<Points2<double>>& gt, Index mode);

struct LossBreakdown {
  double nll1 = 0.0;
  double ce1 = 0.0;
  double nll2 = 0.0;
  double ce2 = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

struct LossTargets {
  std::array<Points2<double>, 2> gt;  // local frame of each interacting agent
  std::array<int, 2> category{0, 0};
};

LossTargets make_targets(const SceneSample& scene, const ModelConfig& cfg, const AnchorSet* anchors = nullptr);

struct LossResult {
  Var total;
  LossBreakdown parts;
  std::array<int, 2> stage1_modes{0, 0};  // selected flat indices (the proposer uses entry 0)
  int stage2_mode = 0;
};

/// Equal-weight sum of the stage losses. Stage 1 selects the best mode inside
/// the ground-truth category per agent; the joint proposer and stage 2 select
/// the joint best mode.
LossResult total_loss(Graph& g, const ForwardPass& fp, const LossTargets& targets, const ModelConfig& cfg);

}  // namespace jam
