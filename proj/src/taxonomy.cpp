#include "jam/taxonomy.hpp"

#include "binary_io.hpp"
#include "jam/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

namespace jam {

std::string to_string(BehaviorCategory c) {
  static const char* names[] = {"stationary", "straight",   "straight-left", "straight-right",
                                "left-turn",  "right-turn", "left-u-turn",   "right-u-turn"};
  return names[static_cast<int>(c)];
}

double heading_change(const Points2<double>& traj, const std::vector<double>* headings) {
  double total = 0.0;
  if (headings && !headings->empty()) {
    double prev = 0.0;
    for (const double h : *headings) {
      total += wrap_angle(h - prev);
      prev = h;
    }
    return total;
  }
  double prev = 0.0;
  Eigen::RowVector2d last(0.0, 0.0);
  for (Index i = 0; i < traj.rows(); ++i) {
    const Eigen::RowVector2d step = traj.row(i) - last;
    if (step.norm() <= 0.1) continue;
    const double h = std::atan2(step.y(), step.x());
    total += wrap_angle(h - prev);
    prev = h;
    last = traj.row(i);
  }
  return total;
}

BehaviorCategory classify_trajectory(const Points2<double>& traj, const std::vector<double>* headings,
                                     const BehaviorThresholds& th) {
  if (traj.rows() == 0) throw std::invalid_argument("classify_trajectory: empty trajectory");
  if (!traj.allFinite()) throw std::invalid_argument("classify_trajectory: non-finite trajectory");
  if (headings) {
    for (const double h : *headings) {
      if (!std::isfinite(h)) throw std::invalid_argument("classify_trajectory: non-finite heading");
    }
  }
  const Eigen::RowVector2d end = traj.row(traj.rows() - 1);
  if (end.norm() < th.stationary_displacement) return BehaviorCategory::Stationary;
  const double dh = heading_change(traj, headings);
  if (std::abs(dh) >= th.uturn_heading) return dh > 0 ? BehaviorCategory::LeftUTurn : BehaviorCategory::RightUTurn;
  if (std::abs(dh) >= th.turn_heading) return dh > 0 ? BehaviorCategory::LeftTurn : BehaviorCategory::RightTurn;
  if (end.y() > th.lateral_offset) return BehaviorCategory::StraightLeft;
  if (end.y() < -th.lateral_offset) return BehaviorCategory::StraightRight;
  return BehaviorCategory::Straight;
}

// ---------------------------------------------------------------------------

const Points2<double>& AnchorSet::of(AgentType t) const {
  if (!has(t)) throw std::invalid_argument("no anchors fitted for agent type " + to_string(t));
  return anchors[static_cast<std::size_t>(t)];
}

int nearest_anchor(const Eigen::Vector2d& endpoint, const Points2<double>& anchors) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < anchors.rows(); ++i) {
    const double d = (anchors.row(i).transpose() - endpoint).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

double assign_all(const Points2<double>& pts, const Points2<double>& centers, std::vector<int>& assignment) {
  double inertia = 0.0;
  for (Index i = 0; i < pts.rows(); ++i) {
    const int c = nearest_anchor(pts.row(i).transpose(), centers);
    assignment[static_cast<std::size_t>(i)] = c;
    inertia += (pts.row(i) - centers.row(c)).squaredNorm();
  }
  return inertia;
}

}  // namespace

KMeansResult fit_kmeans(const Points2<double>& points, int k, std::uint64_t seed, int max_iterations) {
  if (k < 1) throw std::invalid_argument("fit_kmeans: k must be >= 1");
  std::set<std::pair<double, double>> distinct;
  for (Index i = 0; i < points.rows(); ++i) distinct.emplace(points(i, 0), points(i, 1));
  if (static_cast<int>(distinct.size()) < k) {
    throw std::invalid_argument("fit_kmeans: " + std::to_string(distinct.size()) + " distinct points, need " +
                                std::to_string(k));
  }
  const Index n = points.rows();
  Rng rng(seed);

  // k-means++ seeding: first center uniform, then proportional to squared
  // distance to the nearest chosen center.
  KMeansResult res;
  res.centers.resize(k, 2);
  res.centers.row(0) = points.row(static_cast<Index>(rng.index(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (points.row(i) - res.centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (const double v : d2) total += v;
    Index chosen = -1;
    double target = rng.uniform() * total;
    for (Index i = 0; i < n; ++i) {
      const double w = d2[static_cast<std::size_t>(i)];
      if (w <= 0.0) continue;
      chosen = i;
      if (target < w) break;
      target -= w;
    }
    res.centers.row(c) = points.row(chosen);
    for (Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (points.row(i) - res.centers.row(c)).squaredNorm());
    }
  }

  res.assignment.assign(static_cast<std::size_t>(n), -1);
  res.inertia = assign_all(points, res.centers, res.assignment);
  res.inertia_history.push_back(res.inertia);
  for (int it = 0; it < max_iterations; ++it) {
    // Update step; an empty cluster keeps its previous center.
    Points2<double> sums = Points2<double>::Zero(k, 2);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int c = res.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) res.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
    std::vector<int> next(static_cast<std::size_t>(n));
    res.inertia = assign_all(points, res.centers, next);
    res.inertia_history.push_back(res.inertia);
    res.iterations = it + 1;
    if (next == res.assignment) {
      res.converged = true;
      break;
    }
    res.assignment = std::move(next);
  }
  return res;
}

int assign_anchor(const Points2<double>& traj, AgentType type, const AnchorSet& anchors) {
  if (traj.rows() == 0) throw std::invalid_argument("assign_anchor: empty trajectory");
  return nearest_anchor(traj.row(traj.rows() - 1).transpose(), anchors.of(type));
}

std::string to_string(CategoryScheme s) {
  switch (s) {
    case CategoryScheme::Behavior8: return "behavior8";
    case CategoryScheme::Anchor64: return "anchor64";
    case CategoryScheme::None: return "none";
  }
  return "unknown";
}

CategoryScheme parse_category_scheme(const std::string& name) {
  for (const auto s : {CategoryScheme::Behavior8, CategoryScheme::Anchor64, CategoryScheme::None}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown category scheme '" + name + "'");
}

int category_count(CategoryScheme s, int anchors_per_type) {
  switch (s) {
    case CategoryScheme::Behavior8: return kBehaviorCategoryCount;
    case CategoryScheme::Anchor64: return anchors_per_type;
    case CategoryScheme::None: return 1;
  }
  return 1;
}

int gt_category(const Points2<double>& traj, AgentType type, CategoryScheme scheme, const AnchorSet* anchors) {
  switch (scheme) {
    case CategoryScheme::None: return 0;
    case CategoryScheme::Behavior8: return static_cast<int>(classify_trajectory(traj));
    case CategoryScheme::Anchor64:
      if (!anchors) throw std::invalid_argument("gt_category: anchor scheme without anchors");
      return assign_anchor(traj, type, *anchors);
  }
  return 0;
}

std::array<std::vector<Eigen::Vector2d>, kAgentTypeCount> collect_endpoints(const std::vector<SceneSample>& scenes) {
  std::array<std::vector<Eigen::Vector2d>, kAgentTypeCount> out;
  for (const auto& s : scenes) {
    for (const int a : s.interacting) {
      const auto local = to_local(s.future_of(a), s.current_pose(a));
      out[static_cast<std::size_t>(s.agent_types[static_cast<std::size_t>(a)])].push_back(
          local.row(local.rows() - 1).transpose());
    }
  }
  return out;
}

AnchorSet fit_anchors(const std::vector<SceneSample>& scenes, int k, std::uint64_t seed) {
  const auto endpoints = collect_endpoints(scenes);
  AnchorSet set;
  for (int t = 0; t < kAgentTypeCount; ++t) {
    const auto& pts = endpoints[static_cast<std::size_t>(t)];
    std::set<std::pair<double, double>> distinct;
    for (const auto& p : pts) distinct.emplace(p.x(), p.y());
    if (static_cast<int>(distinct.size()) < k) continue;
    Points2<double> m(static_cast<Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Index>(i)) = pts[i].transpose();
    const auto res = fit_kmeans(m, k, seed + static_cast<std::uint64_t>(t));
    set.anchors[static_cast<std::size_t>(t)] = res.centers;
    set.inertia[static_cast<std::size_t>(t)] = res.inertia;
  }
  return set;
}

namespace {
constexpr char kAnchorMagic[4] = {'J', 'A', 'M', 'A'};
}

void write_anchors(const std::string& path, const AnchorSet& anchors) {
  detail::ByteWriter w;
  w.put_bytes(kAnchorMagic, 4);
  w.put<std::uint32_t>(kAnchorVersion);
  std::uint32_t fitted = 0;
  for (int t = 0; t < kAgentTypeCount; ++t) fitted += anchors.has(static_cast<AgentType>(t)) ? 1 : 0;
  w.put<std::uint32_t>(fitted);
  for (int t = 0; t < kAgentTypeCount; ++t) {
    if (!anchors.has(static_cast<AgentType>(t))) continue;
    const auto& a = anchors.anchors[static_cast<std::size_t>(t)];
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.rows()));
    w.put<double>(anchors.inertia[static_cast<std::size_t>(t)]);
    for (Index i = 0; i < a.rows(); ++i) {
      w.put<double>(a(i, 0));
      w.put<double>(a(i, 1));
    }
  }
  detail::write_file(path, w.bytes());
}

AnchorSet read_anchors(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes.data(), bytes.size());
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kAnchorMagic, 4) != 0) throw std::runtime_error("anchors: bad magic");
  if (r.get<std::uint32_t>("version") != kAnchorVersion) throw std::runtime_error("anchors: version mismatch");
  AnchorSet set;
  const auto n = r.get<std::uint32_t>("type count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto t = r.get<std::uint32_t>("type");
    if (t >= kAgentTypeCount) throw std::runtime_error("anchors: bad agent type");
    const auto k = r.get<std::uint32_t>("k");
    set.inertia[t] = r.get<double>("inertia");
    Points2<double> a(k, 2);
    for (std::uint32_t j = 0; j < k; ++j) {
      a(j, 0) = r.get<double>("anchor");
      a(j, 1) = r.get<double>("anchor");
    }
    set.anchors[t] = std::move(a);
  }
  return set;
}

}  // namespace jam
