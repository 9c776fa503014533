#include "jam/metrics.hpp"

#include "jam/taxonomy.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jam {

void ThresholdTable::validate() const {
  for (std::size_t h = 0; h < 3; ++h) {
    if (!(meters[h] > 0.0) || !(seconds[h] > 0.0)) throw std::invalid_argument("thresholds must be positive");
    if (h > 0 && (meters[h] < meters[h - 1] || seconds[h] <= seconds[h - 1])) {
      throw std::invalid_argument("thresholds must be non-decreasing with horizon");
    }
  }
}

int ThresholdTable::steps(int h, double sample_rate_hz, int future) const {
  const int s = static_cast<int>(std::lround(seconds[static_cast<std::size_t>(h)] * sample_rate_hz));
  return std::clamp(s, 1, future);
}

EvalItem make_eval_item(const SceneSample& scene, JointPrediction prediction) {
  EvalItem item;
  item.prediction = std::move(prediction);
  for (std::size_t i = 0; i < 2; ++i) {
    const int a = scene.interacting[i];
    item.gt[i] = scene.future_of(a);
    item.types[i] = scene.agent_types[static_cast<std::size_t>(a)];
  }
  const int first = scene.interacting[0];
  item.category = static_cast<int>(classify_trajectory(to_local(item.gt[0], scene.current_pose(first))));
  return item;
}

namespace {

double distance(const Matrix& steps, const Points2<double>& gt, Index t) {
  return std::hypot(steps(t, 0) - gt(t, 0), steps(t, 1) - gt(t, 1));
}

void check_steps(const PairTrajectories& gt, int steps) {
  if (steps <= 0) throw std::invalid_argument("metrics: no valid ground-truth steps");
  for (const auto& g : gt) {
    if (g.rows() < steps) throw std::invalid_argument("metrics: ground truth shorter than horizon");
  }
}

void check_modes(const JointPrediction& pred) {
  if (pred.modes.empty()) throw std::invalid_argument("metrics: prediction has no modes");
}

}  // namespace

double mode_ade(const JointMode& mode, const PairTrajectories& gt, int steps) {
  double total = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (Index t = 0; t < steps; ++t) total += distance(mode.steps[i], gt[i], t);
  }
  return total / (2.0 * steps);
}

double mode_fde(const JointMode& mode, const PairTrajectories& gt, int steps) {
  return 0.5 * (distance(mode.steps[0], gt[0], steps - 1) + distance(mode.steps[1], gt[1], steps - 1));
}

double min_ade_joint(const JointPrediction& pred, const PairTrajectories& gt, int steps) {
  check_modes(pred);
  check_steps(gt, steps);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : pred.modes) best = std::min(best, mode_ade(m, gt, steps));
  return best;
}

double min_fde_joint(const JointPrediction& pred, const PairTrajectories& gt, int steps) {
  check_modes(pred);
  check_steps(gt, steps);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : pred.modes) best = std::min(best, mode_fde(m, gt, steps));
  return best;
}

bool mode_hits(const JointMode& mode, const PairTrajectories& gt, int steps, double threshold) {
  return distance(mode.steps[0], gt[0], steps - 1) <= threshold && distance(mode.steps[1], gt[1], steps - 1) <= threshold;
}

bool scene_hit(const JointPrediction& pred, const PairTrajectories& gt, int steps, double threshold) {
  check_steps(gt, steps);
  return std::any_of(pred.modes.begin(), pred.modes.end(),
                     [&](const JointMode& m) { return mode_hits(m, gt, steps, threshold); });
}

double miss_rate_joint(const std::vector<EvalItem>& items, int steps, double threshold) {
  if (items.empty()) throw std::invalid_argument("miss_rate_joint: empty evaluation set");
  int misses = 0;
  for (const auto& it : items) misses += scene_hit(it.prediction, it.gt, steps, threshold) ? 0 : 1;
  return static_cast<double>(misses) / static_cast<double>(items.size());
}

double average_precision(const std::vector<int>& outcomes, int positives) {
  if (positives <= 0) throw std::invalid_argument("average_precision: no positives");
  std::array<double, 11> best{};
  long tp = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    tp += outcomes[i];
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    for (long j = 0; j <= 10; ++j) {
      if (tp * 10 >= j * positives) best[static_cast<std::size_t>(j)] = std::max(best[static_cast<std::size_t>(j)], precision);
    }
  }
  return std::accumulate(best.begin(), best.end(), 0.0) / 11.0;
}

MapScores map_score(const std::vector<EvalItem>& items, int steps, double threshold) {
  struct Entry {
    double score;
    std::size_t scene;
    std::size_t mode;
  };
  std::map<int, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < items.size(); ++i) by_category[items[i].category].push_back(i);
  MapScores out;
  if (by_category.empty()) return out;
  for (const auto& [category, scenes] : by_category) {
    std::vector<Entry> entries;
    for (const auto s : scenes) {
      for (std::size_t m = 0; m < items[s].prediction.modes.size(); ++m) {
        entries.push_back({items[s].prediction.modes[m].score, s, m});
      }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });
    std::vector<int> hard, soft;
    std::map<std::size_t, bool> matched;
    for (const auto& e : entries) {
      const auto& item = items[e.scene];
      const bool hit = mode_hits(item.prediction.modes[e.mode], item.gt, steps, threshold);
      if (hit && !matched[e.scene]) {
        matched[e.scene] = true;
        hard.push_back(1);
        soft.push_back(1);
      } else if (hit) {
        hard.push_back(0);
      } else {
        hard.push_back(0);
        soft.push_back(0);
      }
    }
    const int positives = static_cast<int>(scenes.size());
    out.map += average_precision(hard, positives);
    out.soft_map += average_precision(soft, positives);
  }
  out.map /= static_cast<double>(by_category.size());
  out.soft_map /= static_cast<double>(by_category.size());
  return out;
}

namespace {

MetricsRow metrics_for(const std::vector<EvalItem>& items, int steps, double threshold) {
  MetricsRow row;
  row.scenes = static_cast<int>(items.size());
  for (const auto& it : items) {
    row.min_ade += min_ade_joint(it.prediction, it.gt, steps);
    row.min_fde += min_fde_joint(it.prediction, it.gt, steps);
  }
  row.min_ade /= static_cast<double>(items.size());
  row.min_fde /= static_cast<double>(items.size());
  row.miss_rate = miss_rate_joint(items, steps, threshold);
  const MapScores ap = map_score(items, steps, threshold);
  row.map = ap.map;
  row.soft_map = ap.soft_map;
  return row;
}

std::string horizon_text(double seconds) { return fmt::format("{}", seconds); }

}  // namespace

std::vector<MetricsRow> compute_metrics(const std::vector<EvalItem>& items, const ThresholdTable& thresholds,
                                        double sample_rate_hz, const std::string& model) {
  thresholds.validate();
  if (items.empty()) throw std::invalid_argument("compute_metrics: empty evaluation set");
  const int future = static_cast<int>(items.front().gt[0].rows());
  std::vector<std::pair<std::string, std::vector<EvalItem>>> groups;
  for (int t = 0; t < kAgentTypeCount; ++t) {
    std::vector<EvalItem> subset;
    for (const auto& it : items) {
      if (it.types[0] == static_cast<AgentType>(t) || it.types[1] == static_cast<AgentType>(t)) subset.push_back(it);
    }
    if (!subset.empty()) groups.emplace_back(to_string(static_cast<AgentType>(t)), std::move(subset));
  }
  groups.emplace_back("all", items);
  std::vector<MetricsRow> rows;
  for (const auto& [name, subset] : groups) {
    for (int h = 0; h < 3; ++h) {
      MetricsRow row = metrics_for(subset, thresholds.steps(h, sample_rate_hz, future), thresholds.meters[static_cast<std::size_t>(h)]);
      row.model = model;
      row.agent_type = name;
      row.horizon = horizon_text(thresholds.seconds[static_cast<std::size_t>(h)]);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

MetricsRow mean_of(const std::vector<const MetricsRow*>& rows) {
  MetricsRow out;
  for (const auto* r : rows) {
    out.scenes += r->scenes;
    out.min_ade += r->min_ade;
    out.min_fde += r->min_fde;
    out.miss_rate += r->miss_rate;
    out.map += r->map;
    out.soft_map += r->soft_map;
  }
  const double n = static_cast<double>(rows.size());
  out.min_ade /= n;
  out.min_fde /= n;
  out.miss_rate /= n;
  out.map /= n;
  out.soft_map /= n;
  out.scenes = static_cast<int>(std::lround(out.scenes / n));
  return out;
}

}  // namespace

std::vector<MetricsRow> aggregate_table(const std::vector<MetricsRow>& rows) {
  std::vector<std::string> types, horizons;
  std::map<std::string, std::vector<const MetricsRow*>> by_type;
  std::vector<const MetricsRow*> all;
  for (const auto& r : rows) {
    if (r.agent_type == "all") continue;
    if (!by_type.count(r.agent_type)) types.push_back(r.agent_type);
    by_type[r.agent_type].push_back(&r);
    if (std::find(horizons.begin(), horizons.end(), r.horizon) == horizons.end()) horizons.push_back(r.horizon);
    all.push_back(&r);
  }
  if (all.empty()) throw std::invalid_argument("aggregate_table: no per-type rows");
  std::vector<MetricsRow> out;
  for (const auto& t : types) {
    const auto& group = by_type[t];
    for (const auto& h : horizons) {
      if (std::none_of(group.begin(), group.end(), [&](const MetricsRow* r) { return r->horizon == h; })) {
        throw std::invalid_argument("aggregate_table: type " + t + " has no row for horizon " + h);
      }
    }
    MetricsRow row = mean_of(group);
    row.model = group.front()->model;
    row.agent_type = t + "(avg)";
    row.horizon = "avg";
    out.push_back(std::move(row));
  }
  MetricsRow total = mean_of(all);
  total.model = all.front()->model;
  total.agent_type = "all(avg)";
  total.horizon = "avg";
  out.push_back(std::move(total));
  return out;
}

MetricsRow pooled_summary(const std::vector<MetricsRow>& rows) {
  std::vector<const MetricsRow*> pooled;
  for (const auto& r : rows) {
    if (r.agent_type == "all") pooled.push_back(&r);
  }
  if (pooled.empty()) throw std::invalid_argument("pooled_summary: no pooled rows");
  MetricsRow out = mean_of(pooled);
  out.model = pooled.front()->model;
  out.agent_type = "all";
  out.horizon = "avg";
  return out;
}

namespace {
constexpr const char* kHeader = "model,agent_type,horizon,scenes,min_ade,min_fde,miss_rate,map,soft_map";
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    for (const auto* field : {&r.model, &r.agent_type, &r.horizon}) {
      if (field->find_first_of(",\n") != std::string::npos) throw std::invalid_argument("metrics csv: field contains a separator");
    }
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.model, r.agent_type, r.horizon, r.scenes, r.min_ade, r.min_fde,
                       r.miss_rate, r.map, r.soft_map);
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("metrics csv: missing or unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw std::runtime_error("metrics csv: expected 9 fields in '" + line + "'");
    MetricsRow r;
    r.model = f[0];
    r.agent_type = f[1];
    r.horizon = f[2];
    r.scenes = std::stoi(f[3]);
    r.min_ade = std::stod(f[4]);
    r.min_fde = std::stod(f[5]);
    r.miss_rate = std::stod(f[6]);
    r.map = std::stod(f[7]);
    r.soft_map = std::stod(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace jam
