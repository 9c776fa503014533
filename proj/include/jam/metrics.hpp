#pragma once

#include "jam/model.hpp"
#include "jam/scene.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace jam {

/// Miss thresholds per evaluation horizon.
struct ThresholdTable {
  std::array<double, 3> seconds{3.0, 5.0, 8.0};
  std::array<double, 3> meters{2.0, 3.6, 6.0};

  /// Throws unless thresholds are positive and non-decreasing.
  void validate() const;
  /// Number of future steps covered by horizon h (clamped to [1, future]).
  int steps(int h, double sample_rate_hz, int future) const;
};

using PairTrajectories = std::array<Points2<double>, 2>;

/// A joint prediction and its ground truth for one scene.
struct EvalItem {
  JointPrediction prediction;
  PairTrajectories gt;
  std::array<AgentType, 2> types{AgentType::Vehicle, AgentType::Vehicle};
  int category = 0;  // behavior category of the first agent's ground truth
};

EvalItem make_eval_item(const SceneSample& scene, JointPrediction prediction);

/// Per-mode displacement summaries over the first `steps` steps.
double mode_ade(const JointMode& mode, const PairTrajectories& gt, int steps);
double mode_fde(const JointMode& mode, const PairTrajectories& gt, int steps);

double min_ade_joint(const JointPrediction& pred, const PairTrajectories& gt, int steps);
double min_fde_joint(const JointPrediction& pred, const PairTrajectories& gt, int steps);
/// True when both agents are within `threshold` at the last covered step.
bool mode_hits(const JointMode& mode, const PairTrajectories& gt, int steps, double threshold);
bool scene_hit(const JointPrediction& pred, const PairTrajectories& gt, int steps, double threshold);

double miss_rate_joint(const std::vector<EvalItem>& items, int steps, double threshold);

struct MapScores {
  double map = 0.0;
  double soft_map = 0.0;
};

/// 11-point interpolated average precision of a ranked list of outcomes
/// (1 = true positive, 0 = false positive) against `positives`.
double average_precision(const std::vector<int>& outcomes, int positives);

MapScores map_score(const std::vector<EvalItem>& items, int steps, double threshold);

struct MetricsRow {
  std::string model;
  std::string agent_type;  // vehicle, pedestrian, cyclist, all, or "<type>(avg)"
  std::string horizon;     // seconds as text, or "avg"
  int scenes = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  double map = 0.0;
  double soft_map = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

/// One row per (agent type present, horizon) plus pooled "all" rows. A scene
/// counts toward every distinct type of its interacting pair.
std::vector<MetricsRow> compute_metrics(const std::vector<EvalItem>& items, const ThresholdTable& thresholds,
                                        double sample_rate_hz, const std::string& model);

/// Per-type averages over horizons and the all(avg) row over every type and
/// horizon. Ignores pooled "all" rows. Throws on empty input or when a type
/// lacks a horizon present for another type.
std::vector<MetricsRow> aggregate_table(const std::vector<MetricsRow>& rows);

/// Pooled metrics over every scene, averaged over the horizons.
MetricsRow pooled_summary(const std::vector<MetricsRow>& rows);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

}  // namespace jam
