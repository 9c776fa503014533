#include "jam/scene.hpp"

#include "jam/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace jam {

using Vec2 = Eigen::Vector2d;
using std::numbers::pi;

std::string to_string(AgentType t) {
  switch (t) {
    case AgentType::Vehicle: return "vehicle";
    case AgentType::Pedestrian: return "pedestrian";
    case AgentType::Cyclist: return "cyclist";
  }
  return "unknown";
}

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Crossing: return "crossing";
    case ScenarioKind::Merge: return "merge";
    case ScenarioKind::Yield: return "yield";
    case ScenarioKind::Follow: return "follow";
    case ScenarioKind::TurnConflict: return "turn-conflict";
  }
  return "unknown";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  for (int k = 0; k < kScenarioKindCount; ++k) {
    if (to_string(static_cast<ScenarioKind>(k)) == name) return static_cast<ScenarioKind>(k);
  }
  throw std::invalid_argument("unknown scenario kind '" + name + "'");
}

bool SceneSample::agent_present(int agent) const {
  for (int t = 0; t < dims.history; ++t) {
    if (step_valid(agent, t)) return true;
  }
  return false;
}

Pose2d SceneSample::current_pose(int agent) const {
  for (int t = dims.history - 1; t >= 0; --t) {
    if (step_valid(agent, t)) {
      const auto r = history_row(agent, t);
      return Pose2d(histories(r, kStateX), histories(r, kStateY), histories(r, kStateHeading));
    }
  }
  throw std::invalid_argument("agent " + std::to_string(agent) + " has no valid history step");
}

Points2<double> SceneSample::future_of(int agent) const {
  return futures.middleRows(Index(agent) * dims.future, dims.future);
}

Pose2d scene_anchor(const SceneSample& scene) {
  const Pose2d a = scene.current_pose(scene.interacting[0]);
  const Pose2d b = scene.current_pose(scene.interacting[1]);
  return Pose2d(0.5 * (a.x + b.x), 0.5 * (a.y + b.y), a.heading);
}

namespace {

// ---------------------------------------------------------------------------
// Paths and longitudinal motion

struct Segment {
  double length;
  double curvature;  // signed, 1/m; 0 for straight
};

class Path {
 public:
  Path() = default;
  Path(Pose2d start, std::vector<Segment> segments) : start_(start), segments_(std::move(segments)) {}

  Pose2d at(double s) const {
    double x = start_.x, y = start_.y, h = start_.heading;
    if (s < 0.0) return Pose2d(x + s * std::cos(h), y + s * std::sin(h), h);
    for (const auto& seg : segments_) {
      const double ds = std::min(s, seg.length);
      advance(x, y, h, ds, seg.curvature);
      s -= ds;
      if (s <= 0.0) return Pose2d(x, y, h);
    }
    advance(x, y, h, s, 0.0);
    return Pose2d(x, y, h);
  }

  double curvature_at(double s) const {
    if (s < 0.0) return 0.0;
    for (const auto& seg : segments_) {
      if (s <= seg.length) return seg.curvature;
      s -= seg.length;
    }
    return 0.0;
  }

  double max_curvature() const {
    double k = 0.0;
    for (const auto& seg : segments_) k = std::max(k, std::abs(seg.curvature));
    return k;
  }

  const Pose2d& start() const { return start_; }
  void set_start(const Pose2d& p) { start_ = p; }

 private:
  static void advance(double& x, double& y, double& h, double ds, double k) {
    if (std::abs(k) < 1e-12) {
      x += ds * std::cos(h);
      y += ds * std::sin(h);
      return;
    }
    const double h1 = h + k * ds;
    x += (std::sin(h1) - std::sin(h)) / k;
    y += -(std::cos(h1) - std::cos(h)) / k;
    h = h1;
  }

  Pose2d start_;
  std::vector<Segment> segments_;
};

constexpr double kDt = 0.005;

/// Longitudinal state tabulated at kDt for t >= 0; constant speed before 0.
struct Longitudinal {
  std::vector<double> dist;
  std::vector<double> speed;
  std::vector<double> accel;

  double dist_at(double t) const {
    if (t < 0.0) return speed.front() * t;
    return dist[index(t)];
  }
  double speed_at(double t) const { return t < 0.0 ? speed.front() : speed[index(t)]; }
  double accel_at(double t) const { return t < 0.0 ? 0.0 : accel[index(t)]; }

 private:
  std::size_t index(double t) const {
    const auto i = static_cast<std::size_t>(std::llround(t / kDt));
    return std::min(i, dist.size() - 1);
  }
};

struct Phase {
  double duration;
  double accel;
};

Longitudinal integrate_profile(double v0, double vmax, const std::vector<Phase>& phases, double horizon) {
  Longitudinal lon;
  const auto n = static_cast<std::size_t>(std::llround(horizon / kDt)) + 1;
  lon.dist.resize(n);
  lon.speed.resize(n);
  lon.accel.resize(n);
  double v = std::min(v0, vmax), d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * kDt;
    double a = 0.0, start = 0.0;
    for (const auto& ph : phases) {
      if (t >= start && t < start + ph.duration) {
        a = ph.accel;
        break;
      }
      start += ph.duration;
    }
    if ((a < 0.0 && v <= 0.0) || (a > 0.0 && v >= vmax)) a = 0.0;
    lon.dist[i] = d;
    lon.speed[i] = v;
    lon.accel[i] = a;
    double v1 = v + a * kDt;
    v1 = std::clamp(v1, 0.0, vmax);
    d += 0.5 * (v + v1) * kDt;
    v = v1;
  }
  return lon;
}

struct Motion {
  Path path;
  Longitudinal lon;
  double s0 = 0.0;

  Pose2d pose(double t) const { return path.at(s0 + lon.dist_at(t)); }
  Vec2 velocity(double t) const {
    const double h = pose(t).heading;
    return lon.speed_at(t) * Vec2(std::cos(h), std::sin(h));
  }
  double accel_magnitude(double t) const {
    const double v = lon.speed_at(t);
    const double lat = v * v * path.curvature_at(s0 + lon.dist_at(t));
    return std::hypot(lon.accel_at(t), lat);
  }
};

// ---------------------------------------------------------------------------
// Map elements

struct Element {
  std::vector<Vec2> points;
  LaneType type;
};

std::vector<Vec2> sample_segment(const Vec2& a, const Vec2& b, int n) {
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / std::max(1, n - 1)));
  return pts;
}

std::vector<Vec2> sample_path(const Path& path, double s_begin, double s_end, int n) {
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) {
    const double s = s_begin + (s_end - s_begin) * (static_cast<double>(i) / std::max(1, n - 1));
    pts.push_back(path.at(s).position());
  }
  return pts;
}

std::vector<Vec2> sample_square(const Vec2& center, double heading, double half, int n) {
  const Vec2 u(std::cos(heading), std::sin(heading)), w(-u.y(), u.x());
  const Vec2 corners[5] = {center - half * u - half * w, center + half * u - half * w, center + half * u + half * w,
                           center - half * u + half * w, center - half * u - half * w};
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) {
    const double f = 4.0 * static_cast<double>(i) / n;
    const int side = std::min(3, static_cast<int>(f));
    pts.push_back(corners[side] + (corners[side + 1] - corners[side]) * (f - side));
  }
  return pts;
}

/// Lanes along a straight line: same-direction lane through `ref` and an
/// opposite-direction lane offset to the left, cut into 30 m pieces.
void add_road(std::vector<Element>& out, const Vec2& ref, double heading, int n_points) {
  const Vec2 u(std::cos(heading), std::sin(heading)), left(-u.y(), u.x());
  for (double s = -90.0; s < 60.0; s += 30.0) {
    out.push_back({sample_segment(ref + s * u, ref + (s + 30.0) * u, n_points), LaneType::Lane});
    const Vec2 o = ref + 3.5 * left;
    out.push_back({sample_segment(o + (s + 30.0) * u, o + s * u, n_points), LaneType::Lane});
  }
}

// ---------------------------------------------------------------------------
// Scenario construction

struct AgentPlan {
  Motion motion;
  AgentType type = AgentType::Vehicle;
};

struct Background {
  Vec2 position;
  double heading;
  double speed;
  AgentType type;
  int invalid_prefix;
};

double type_speed_cap(AgentType t) {
  switch (t) {
    case AgentType::Vehicle: return 16.0;
    case AgentType::Pedestrian: return 2.5;
    case AgentType::Cyclist: return 8.0;
  }
  return 1.0;
}

double type_speed_limit(AgentType t) {
  switch (t) {
    case AgentType::Vehicle: return 30.0;
    case AgentType::Pedestrian: return 3.0;
    case AgentType::Cyclist: return 12.0;
  }
  return 0.0;
}

double draw_speed(AgentType t, bool turning, Rng& rng) {
  switch (t) {
    case AgentType::Pedestrian: return rng.uniform(1.0, 2.0);
    case AgentType::Cyclist: return turning ? rng.uniform(3.0, 5.0) : rng.uniform(3.0, 7.0);
    case AgentType::Vehicle: return turning ? rng.uniform(4.0, 7.0) : rng.uniform(7.0, 13.0);
  }
  return 1.0;
}

std::vector<Phase> free_phases(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.4) return {};
  if (u < 0.7) return {{rng.uniform(1.0, 4.0), rng.uniform(0.3, 1.5)}};
  return {{rng.uniform(1.0, 3.0), rng.uniform(-2.0, -0.5)}};
}

std::vector<Phase> yielding_phases(Rng& rng) {
  return {{rng.uniform(1.0, 2.5), rng.uniform(-3.0, -1.5)}, {rng.uniform(0.0, 1.5), 0.0},
          {rng.uniform(2.0, 4.0), rng.uniform(1.0, 2.0)}};
}

Longitudinal make_longitudinal(AgentType type, const Path& path, double v0, const std::vector<Phase>& phases,
                               double horizon) {
  double vmax = type_speed_cap(type);
  const double k = path.max_curvature();
  if (k > 0.0) vmax = std::min(vmax, std::sqrt(6.0 / k));
  return integrate_profile(v0, vmax, phases, horizon);
}

/// Places `motion` so that it reaches arc length `s_conflict` at time `t`.
void place(Motion& motion, double s_conflict, double t) { motion.s0 = s_conflict - motion.lon.dist_at(t); }

enum class Shape { Straight, Left, Right, UTurnLeft, UTurnRight };

struct ShapedPath {
  Path path;
  double turn_start;  // arc length where the maneuver starts
  double arc_length;
  double radius;
};

ShapedPath shaped_path(Shape shape, double lead_in, Rng& rng) {
  const Pose2d start(-lead_in, 0.0, 0.0);
  switch (shape) {
    case Shape::Straight: return {Path(start, {{lead_in + 200.0, 0.0}}), lead_in, 0.0, 0.0};
    case Shape::Left:
    case Shape::Right: {
      const double r = rng.uniform(8.0, 14.0);
      const double sign = shape == Shape::Left ? 1.0 : -1.0;
      const double len = r * pi / 2.0;
      return {Path(start, {{lead_in, 0.0}, {len, sign / r}, {200.0, 0.0}}), lead_in, len, r};
    }
    case Shape::UTurnLeft:
    case Shape::UTurnRight: {
      const double r = rng.uniform(5.0, 8.0);
      const double sign = shape == Shape::UTurnLeft ? 1.0 : -1.0;
      const double len = r * pi;
      return {Path(start, {{lead_in, 0.0}, {len, sign / r}, {200.0, 0.0}}), lead_in, len, r};
    }
  }
  return {};
}

Path straight_through(const Vec2& p, double heading, double before) {
  const Vec2 u(std::cos(heading), std::sin(heading));
  const Vec2 s = p - before * u;
  return Path(Pose2d(s.x(), s.y(), heading), {{before + 200.0, 0.0}});
}

struct PairPlan {
  AgentPlan a;
  AgentPlan b;
  std::vector<Element> elements;
  Vec2 focus;  // conflict point, used to place background traffic
  double road_heading_b = pi / 2.0;
};

AgentType draw_driver_type(Rng& rng) { return rng.bernoulli(0.85) ? AgentType::Vehicle : AgentType::Cyclist; }

PairPlan plan_pair(ScenarioKind kind, bool uturn, const SceneDims& dims, Rng& rng) {
  const double horizon = static_cast<double>(dims.future) / dims.sample_rate_hz + 0.5;
  PairPlan plan;
  plan.a.type = draw_driver_type(rng);
  plan.b.type = draw_driver_type(rng);
  if (kind == ScenarioKind::Crossing && rng.bernoulli(0.3)) plan.b.type = AgentType::Pedestrian;

  if (kind == ScenarioKind::Follow && !uturn) {
    // Leader b and follower a share a straight lane along +x.
    const double v0 = draw_speed(AgentType::Vehicle, false, rng);
    plan.a.type = plan.b.type = AgentType::Vehicle;
    const double gap = rng.uniform(6.0, 9.0);
    Motion leader{Path(Pose2d(-100.0, 0.0, 0.0), {{400.0, 0.0}}),
                  integrate_profile(v0, type_speed_cap(AgentType::Vehicle), free_phases(rng), horizon), 100.0 + gap};
    // Intelligent-driver follower.
    const double v_des = v0 * rng.uniform(1.0, 1.3), headway = 1.0, min_gap = 2.0, a_max = 1.5, b_comf = 2.0;
    Longitudinal lon;
    const auto n = leader.lon.dist.size();
    lon.dist.resize(n);
    lon.speed.resize(n);
    lon.accel.resize(n);
    double v = v0 * rng.uniform(0.9, 1.1), d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double lead_pos = gap + leader.lon.dist[i];
      const double spacing = std::max(lead_pos - d, 0.5);
      const double dv = v - leader.lon.speed[i];
      const double desired = min_gap + v * headway + v * dv / (2.0 * std::sqrt(a_max * b_comf));
      double acc = a_max * (1.0 - std::pow(v / v_des, 4.0) - std::pow(std::max(desired, 0.0) / spacing, 2.0));
      acc = std::clamp(acc, -7.0, a_max);
      if (v <= 0.0 && acc < 0.0) acc = 0.0;
      lon.dist[i] = d;
      lon.speed[i] = v;
      lon.accel[i] = acc;
      const double v1 = std::max(0.0, v + acc * kDt);
      d += 0.5 * (v + v1) * kDt;
      v = v1;
    }
    plan.a.motion = Motion{Path(Pose2d(-100.0, 0.0, 0.0), {{400.0, 0.0}}), std::move(lon), 100.0};
    plan.b.motion = std::move(leader);
    plan.focus = Vec2(0.0, 0.0);
    add_road(plan.elements, Vec2(0.0, 0.0), 0.0, dims.map_points);
    add_road(plan.elements, Vec2(0.0, -40.0), 0.0, dims.map_points);
    return plan;
  }

  Shape shape_a = Shape::Straight;
  if (uturn) {
    shape_a = rng.bernoulli(0.5) ? Shape::UTurnLeft : Shape::UTurnRight;
  } else if (kind == ScenarioKind::Yield) {
    shape_a = Shape::Left;
  } else if (kind == ScenarioKind::TurnConflict) {
    shape_a = Shape::Right;
  }
  const double lead_in = 150.0;
  const ShapedPath sa = shaped_path(shape_a, lead_in, rng);
  const bool a_turns = shape_a != Shape::Straight;
  const double frac = a_turns ? rng.uniform(0.35, 0.65) : 0.0;
  const double s_conflict_a = sa.turn_start + frac * sa.arc_length + (a_turns ? 0.0 : rng.uniform(-5.0, 5.0));
  const Vec2 p = sa.path.at(s_conflict_a).position();
  plan.focus = p;

  // Who reaches the conflict point first, and by how much.
  bool a_first = rng.bernoulli(0.5);
  if (kind == ScenarioKind::Yield || kind == ScenarioKind::TurnConflict) a_first = false;
  if (kind == ScenarioKind::Merge) a_first = true;
  const double t_first = rng.uniform(2.0, 5.5);
  const double delta = rng.uniform(0.3, 1.5);
  const double t_a = a_first ? t_first : t_first + delta;
  const double t_b = a_first ? t_first + delta : t_first;

  Path path_b;
  double s_conflict_b = 0.0;
  double heading_b = pi / 2.0;
  switch (kind) {
    case ScenarioKind::Crossing: heading_b = rng.bernoulli(0.5) ? pi / 2.0 : -pi / 2.0; break;
    case ScenarioKind::Yield: heading_b = pi; break;
    case ScenarioKind::TurnConflict: heading_b = -pi / 2.0; break;
    case ScenarioKind::Follow: heading_b = 0.0; break;
    case ScenarioKind::Merge: heading_b = 0.0; break;
  }
  if (kind == ScenarioKind::Merge && !uturn) {
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;  // ramp joins from the right (+1) or left
    const double ramp = rng.uniform(0.3, 0.5);
    const double r = rng.uniform(30.0, 50.0);
    const double l1 = 150.0, arc = r * ramp;
    Path shape(Pose2d(0.0, 0.0, side * ramp), {{l1, 0.0}, {arc, -side / r}, {200.0, 0.0}});
    const Pose2d end = shape.at(l1 + arc);
    shape.set_start(Pose2d(p.x() - end.x, p.y() - end.y, side * ramp));
    path_b = shape;
    s_conflict_b = l1 + arc;
    heading_b = side * ramp;
  } else if (kind == ScenarioKind::Follow) {
    // U-turning follower: the leader keeps its lane ahead of the conflict point.
    path_b = straight_through(p, 0.0, 150.0);
    s_conflict_b = 150.0;
  } else {
    path_b = straight_through(p, heading_b, 150.0);
    s_conflict_b = 150.0;
  }
  plan.road_heading_b = heading_b;

  const bool a_yields = !a_first && (kind == ScenarioKind::Yield || kind == ScenarioKind::TurnConflict);
  const bool b_yields = a_first && rng.bernoulli(0.5);
  const double va = draw_speed(plan.a.type, a_turns, rng);
  const double vb = draw_speed(plan.b.type, kind == ScenarioKind::Merge, rng);
  plan.a.motion.path = sa.path;
  plan.a.motion.lon =
      make_longitudinal(plan.a.type, sa.path, va, a_yields ? yielding_phases(rng) : free_phases(rng), horizon);
  plan.b.motion.path = path_b;
  plan.b.motion.lon = make_longitudinal(plan.b.type, path_b, vb,
                                        (b_yields && plan.b.type != AgentType::Pedestrian) ? yielding_phases(rng)
                                                                                           : free_phases(rng),
                                        horizon);
  place(plan.a.motion, s_conflict_a, t_a);
  place(plan.b.motion, s_conflict_b, t_b);

  // Map: both approach roads, turn connectors for a, a crosswalk at the conflict point.
  add_road(plan.elements, Vec2(p.x(), 0.0), 0.0, dims.map_points);
  add_road(plan.elements, p, heading_b, dims.map_points);
  const double r_conn = a_turns ? sa.radius : 10.0;
  for (const double sign : {1.0, -1.0}) {
    const Path conn(Pose2d(p.x() - 5.0, 0.0, 0.0), {{r_conn * pi / 2.0, sign / r_conn}});
    plan.elements.push_back({sample_path(conn, 0.0, r_conn * pi / 2.0, dims.map_points), LaneType::Lane});
  }
  if (kind == ScenarioKind::Merge && !uturn) {
    plan.elements.push_back({sample_path(path_b, s_conflict_b - 40.0, s_conflict_b, dims.map_points), LaneType::Lane});
  } else {
    plan.elements.push_back({sample_square(p, heading_b, 2.5, dims.map_points), LaneType::Crosswalk});
  }
  return plan;
}

Background draw_background(const PairPlan& plan, const SceneDims& dims, Rng& rng) {
  Background bg;
  const double r = rng.uniform();
  bg.type = r < 0.7 ? AgentType::Vehicle : (r < 0.85 ? AgentType::Pedestrian : AgentType::Cyclist);
  const double road = rng.bernoulli(0.5) ? 0.0 : plan.road_heading_b;
  const bool opposite = rng.bernoulli(0.5);
  const Vec2 u(std::cos(road), std::sin(road)), left(-u.y(), u.x());
  double offset = opposite ? 3.5 : 0.0;
  if (bg.type == AgentType::Pedestrian) offset = rng.bernoulli(0.5) ? 6.0 : -2.5;
  bg.heading = opposite ? road + pi : road;
  bg.position = plan.focus + rng.uniform(-60.0, 40.0) * u + offset * left;
  bg.speed = bg.type == AgentType::Pedestrian ? rng.uniform(0.8, 1.8)
             : bg.type == AgentType::Cyclist  ? rng.uniform(3.0, 6.0)
                                              : rng.uniform(4.0, 12.0);
  if (rng.bernoulli(0.15)) bg.speed = 0.0;
  bg.invalid_prefix = (dims.history > 1 && rng.bernoulli(0.2)) ? 1 + static_cast<int>(rng.index(dims.history - 1)) : 0;
  return bg;
}

double step_time_history(const SceneDims& d, int k) { return static_cast<double>(k - (d.history - 1)) / d.sample_rate_hz; }
double step_time_future(const SceneDims& d, int k) { return static_cast<double>(k + 1) / d.sample_rate_hz; }

void write_state(SceneSample& s, int agent, int step, const Pose2d& pose, const Vec2& vel) {
  const auto r = s.history_row(agent, step);
  s.histories(r, kStateX) = pose.x;
  s.histories(r, kStateY) = pose.y;
  s.histories(r, kStateHeading) = pose.heading;
  s.histories(r, kStateVx) = vel.x();
  s.histories(r, kStateVy) = vel.y();
  s.histories(r, kStateValid) = 1.0;
}

void fill_map(SceneSample& s, int agent, const std::vector<Element>& elements) {
  const Vec2 pos(s.histories(s.history_row(agent, s.dims.history - 1), kStateX),
                 s.histories(s.history_row(agent, s.dims.history - 1), kStateY));
  std::vector<std::pair<double, int>> order;
  for (std::size_t e = 0; e < elements.size(); ++e) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : elements[e].points) best = std::min(best, (p - pos).norm());
    order.emplace_back(best, static_cast<int>(e));
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  const int n = std::min<int>(s.dims.map_elements, static_cast<int>(order.size()));
  for (int m = 0; m < n; ++m) {
    const auto& el = elements[static_cast<std::size_t>(order[static_cast<std::size_t>(m)].second)];
    const int np = static_cast<int>(el.points.size());
    for (int i = 0; i < np; ++i) {
      Vec2 dir = i + 1 < np ? el.points[i + 1] - el.points[i] : el.points[i] - el.points[i - 1];
      if (dir.norm() > 1e-12) dir.normalize();
      const auto r = s.map_row(agent, m, i);
      s.map(r, kPointX) = el.points[i].x();
      s.map(r, kPointY) = el.points[i].y();
      s.map(r, kPointDx) = dir.x();
      s.map(r, kPointDy) = dir.y();
      s.map(r, kPointType) = static_cast<double>(el.type);
    }
  }
}

void quantize(Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
}

double closest_approach(const SceneSample& s) {
  double best = std::numeric_limits<double>::infinity();
  const auto a = s.future_of(s.interacting[0]);
  const auto b = s.future_of(s.interacting[1]);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) best = std::min(best, (a.row(i) - b.row(j)).norm());
  }
  return best;
}

bool kinematically_valid(const PairPlan& plan, const SceneDims& dims) {
  const double horizon = static_cast<double>(dims.future) / dims.sample_rate_hz;
  for (const AgentPlan* ap : {&plan.a, &plan.b}) {
    for (double t = 0.0; t <= horizon; t += 0.05) {
      if (ap->motion.accel_magnitude(t) > 8.0) return false;
      if (ap->motion.lon.speed_at(t) > type_speed_limit(ap->type)) return false;
    }
  }
  return true;
}

std::optional<SceneSample> try_generate(ScenarioKind kind, const GenerationOptions& opt, Rng& rng) {
  const SceneDims& d = opt.dims;
  if (d.agents < 2 || d.history < 1 || d.future < 1 || d.map_elements < 1 || d.map_points < 2) {
    throw std::invalid_argument("generate_scene: invalid dimensions");
  }
  PairPlan plan = plan_pair(kind, opt.uturn, d, rng);
  if (!kinematically_valid(plan, d)) return std::nullopt;
  if (opt.uturn) {
    // The whole U-turn has to happen inside the prediction window.
    const double end = static_cast<double>(d.future) / d.sample_rate_hz;
    const double turned = wrap_angle(plan.a.motion.pose(end).heading - plan.a.motion.pose(0.0).heading);
    if (std::abs(turned) < 5.0 * pi / 6.0 + 0.05) return std::nullopt;
  }

  SceneSample s;
  s.dims = d;
  s.kind = kind;
  s.low_probability_maneuver = opt.uturn;
  s.histories = Matrix::Zero(Index(d.agents) * d.history, SceneDims::state_dim);
  s.map = Matrix::Zero(Index(d.agents) * d.map_elements * d.map_points, SceneDims::point_dim);
  s.futures = Matrix::Zero(Index(d.agents) * d.future, 2);
  s.agent_types.assign(static_cast<std::size_t>(d.agents), AgentType::Vehicle);

  const int background = static_cast<int>(rng.index(static_cast<std::uint64_t>(d.agents - 1)));
  const int present = 2 + background;
  // Slots for the pair among the present agents.
  const int slot_a = static_cast<int>(rng.index(static_cast<std::uint64_t>(present)));
  int slot_b = static_cast<int>(rng.index(static_cast<std::uint64_t>(present - 1)));
  if (slot_b >= slot_a) ++slot_b;
  s.interacting = {slot_a, slot_b};

  for (const auto& [slot, ap] : {std::pair<int, const AgentPlan*>{slot_a, &plan.a}, {slot_b, &plan.b}}) {
    s.agent_types[static_cast<std::size_t>(slot)] = ap->type;
    for (int k = 0; k < d.history; ++k) {
      const double t = step_time_history(d, k);
      write_state(s, slot, k, ap->motion.pose(t), ap->motion.velocity(t));
    }
    for (int k = 0; k < d.future; ++k) {
      const auto p = ap->motion.pose(step_time_future(d, k));
      s.futures(s.future_row(slot, k), 0) = p.x;
      s.futures(s.future_row(slot, k), 1) = p.y;
    }
  }
  int slot = 0;
  for (int i = 0; i < background; ++i) {
    while (slot == slot_a || slot == slot_b) ++slot;
    const Background bg = draw_background(plan, d, rng);
    s.agent_types[static_cast<std::size_t>(slot)] = bg.type;
    const Vec2 u(std::cos(bg.heading), std::sin(bg.heading));
    for (int k = bg.invalid_prefix; k < d.history; ++k) {
      const Vec2 pos = bg.position + bg.speed * step_time_history(d, k) * u;
      write_state(s, slot, k, Pose2d(pos.x(), pos.y(), bg.heading), bg.speed * u);
    }
    for (int k = 0; k < d.future; ++k) {
      const Vec2 pos = bg.position + bg.speed * step_time_future(d, k) * u;
      s.futures(s.future_row(slot, k), 0) = pos.x();
      s.futures(s.future_row(slot, k), 1) = pos.y();
    }
    ++slot;
  }
  for (int agent = 0; agent < present; ++agent) fill_map(s, agent, plan.elements);

  // Random global placement.
  RigidTransform2d g;
  g.rotation = rng.uniform(-pi, pi);
  g.translation = Vec2(rng.uniform(-500.0, 500.0), rng.uniform(-500.0, 500.0));
  s = rigid_transform_scene(s, g);
  quantize(s.histories);
  quantize(s.map);
  quantize(s.futures);

  if (!(closest_approach(s) < 10.0)) return std::nullopt;
  if (kind == ScenarioKind::Follow && !opt.uturn) {
    // Follower stays behind the leader along the lane.
    const Pose2d lane = s.current_pose(slot_b);
    const auto fa = to_local(s.future_of(slot_a), lane);
    const auto fb = to_local(s.future_of(slot_b), lane);
    for (Index k = 0; k < fa.rows(); ++k) {
      if (fa(k, 0) >= fb(k, 0)) return std::nullopt;
    }
  }
  return s;
}

}  // namespace

SceneSample generate_scene(ScenarioKind kind, std::uint64_t seed, const GenerationOptions& options) {
  if (static_cast<int>(kind) < 0 || static_cast<int>(kind) >= kScenarioKindCount) {
    throw std::invalid_argument("generate_scene: unknown scenario kind");
  }
  Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(kind));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    if (auto s = try_generate(kind, options, rng)) return std::move(*s);
  }
  throw std::runtime_error("generate_scene: no valid scene after 1000 attempts");
}

SceneSample rigid_transform_scene(const SceneSample& scene, const RigidTransform2d& g) {
  SceneSample out = scene;
  const auto& d = scene.dims;
  for (int a = 0; a < d.agents; ++a) {
    for (int t = 0; t < d.history; ++t) {
      if (!scene.step_valid(a, t)) continue;
      const auto r = scene.history_row(a, t);
      const Vec2 p = g.apply_point(Vec2(scene.histories(r, kStateX), scene.histories(r, kStateY)));
      const Vec2 v = g.apply_vector(Vec2(scene.histories(r, kStateVx), scene.histories(r, kStateVy)));
      out.histories(r, kStateX) = p.x();
      out.histories(r, kStateY) = p.y();
      out.histories(r, kStateHeading) = g.apply_heading(scene.histories(r, kStateHeading));
      out.histories(r, kStateVx) = v.x();
      out.histories(r, kStateVy) = v.y();
    }
    if (!scene.agent_present(a)) continue;
    for (int t = 0; t < d.future; ++t) {
      const auto r = scene.future_row(a, t);
      const Vec2 p = g.apply_point(Vec2(scene.futures(r, 0), scene.futures(r, 1)));
      out.futures(r, 0) = p.x();
      out.futures(r, 1) = p.y();
    }
    for (int m = 0; m < d.map_elements; ++m) {
      for (int i = 0; i < d.map_points; ++i) {
        const auto r = scene.map_row(a, m, i);
        if (scene.map(r, kPointType) < 0.5) continue;
        const Vec2 p = g.apply_point(Vec2(scene.map(r, kPointX), scene.map(r, kPointY)));
        const Vec2 u = g.apply_vector(Vec2(scene.map(r, kPointDx), scene.map(r, kPointDy)));
        out.map(r, kPointX) = p.x();
        out.map(r, kPointY) = p.y();
        out.map(r, kPointDx) = u.x();
        out.map(r, kPointDy) = u.y();
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::map<ScenarioKind, double> parse_kind_mix(const std::string& text) {
  std::map<ScenarioKind, double> mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("kind mix entry '" + item + "' lacks ':'");
    mix[parse_scenario_kind(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
  }
  return mix;
}

Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.scenes < 1) throw std::invalid_argument("generate_dataset: scene count must be >= 1");
  double total = 0.0;
  for (const auto& [kind, w] : spec.mix) {
    if (w < 0.0) throw std::invalid_argument("generate_dataset: negative mix weight for " + to_string(kind));
    total += w;
  }
  if (spec.mix.empty() || std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("generate_dataset: mix weights must sum to 1");
  }
  if (spec.uturn_rate < 0.0 || spec.uturn_rate > 1.0) throw std::invalid_argument("generate_dataset: bad U-turn rate");

  Dataset ds;
  ds.header.dims = spec.dims;
  ds.header.scenes = static_cast<std::uint32_t>(spec.scenes);
  ds.header.seed = seed;
  ds.scenes.reserve(static_cast<std::size_t>(spec.scenes));
  Rng master(seed);
  for (int i = 0; i < spec.scenes; ++i) {
    const double u = master.uniform();
    double acc = 0.0;
    ScenarioKind kind = spec.mix.rbegin()->first;
    for (const auto& [k, w] : spec.mix) {
      acc += w;
      if (u < acc) {
        kind = k;
        break;
      }
    }
    GenerationOptions opt;
    opt.dims = spec.dims;
    opt.uturn = master.bernoulli(spec.uturn_rate);
    const std::uint64_t scene_seed = master.next_u64();
    ds.scenes.push_back(generate_scene(kind, scene_seed, opt));
  }
  return ds;
}

}  // namespace jam
