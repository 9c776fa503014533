#pragma once

#include "jam/geometry.hpp"
#include "jam/scene.hpp"

#include <array>
#include <numbers>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jam {

enum class BehaviorCategory : int {
  Stationary = 0,
  Straight = 1,
  StraightLeft = 2,
  StraightRight = 3,
  LeftTurn = 4,
  RightTurn = 5,
  LeftUTurn = 6,
  RightUTurn = 7,
};
inline constexpr int kBehaviorCategoryCount = 8;
std::string to_string(BehaviorCategory c);

/// Thresholds of the rule-based classifier.
struct BehaviorThresholds {
  double stationary_displacement = 2.0;             // m
  double uturn_heading = 5.0 * std::numbers::pi / 6.0;  // rad
  double turn_heading = std::numbers::pi / 6.0;      // rad
  double lateral_offset = 1.0;                        // m
};

/// Net heading change along a local-frame trajectory whose start is the
/// origin facing +x. Uses `headings` when given, otherwise the directions of
/// displacements longer than 0.1 m. Unwrapped, so it may exceed pi.
double heading_change(const Points2<double>& traj, const std::vector<double>* headings = nullptr);

/// Rule-based category of a local-frame trajectory. Throws on non-finite
/// input.
BehaviorCategory classify_trajectory(const Points2<double>& traj, const std::vector<double>* headings = nullptr,
                                     const BehaviorThresholds& th = {});

/// Endpoint anchors per agent type.
struct AnchorSet {
  std::array<Points2<double>, kAgentTypeCount> anchors;  // k x 2 each, empty if not fitted
  std::array<double, kAgentTypeCount> inertia{};

  bool has(AgentType t) const { return anchors[static_cast<std::size_t>(t)].rows() > 0; }
  const Points2<double>& of(AgentType t) const;
  bool operator==(const AnchorSet&) const = default;
};

struct KMeansResult {
  Points2<double> centers;
  std::vector<int> assignment;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per iteration
  int iterations = 0;
  bool converged = false;  // assignment fixpoint reached
};

/// k-means with k-means++ seeding; stops at an assignment fixpoint or after
/// max_iterations. Throws if there are fewer than k distinct points.
KMeansResult fit_kmeans(const Points2<double>& points, int k, std::uint64_t seed, int max_iterations = 100);

/// Nearest anchor (Euclidean), ties to the lowest index.
int nearest_anchor(const Eigen::Vector2d& endpoint, const Points2<double>& anchors);
/// Category index in [0, k) of the trajectory endpoint. Throws if the type
/// has no anchors.
int assign_anchor(const Points2<double>& traj, AgentType type, const AnchorSet& anchors);

enum class CategoryScheme { Behavior8, Anchor64, None };
std::string to_string(CategoryScheme s);
CategoryScheme parse_category_scheme(const std::string& name);
/// Number of categories the scheme produces (anchor count for Anchor64).
int category_count(CategoryScheme s, int anchors_per_type = 64);

/// Ground-truth category of a local-frame trajectory under a scheme.
int gt_category(const Points2<double>& traj, AgentType type, CategoryScheme scheme, const AnchorSet* anchors = nullptr);

/// Endpoints of every interacting agent's ground truth in its local frame,
/// grouped by agent type.
std::array<std::vector<Eigen::Vector2d>, kAgentTypeCount> collect_endpoints(const std::vector<SceneSample>& scenes);

/// Fits one anchor set per agent type that has at least k distinct endpoints.
AnchorSet fit_anchors(const std::vector<SceneSample>& scenes, int k, std::uint64_t seed);

/// Layout: "JAMA" | u32 version | u32 type count | per type:
/// u32 type | u32 k | f64 inertia | k x (f64 x, f64 y).
inline constexpr std::uint32_t kAnchorVersion = 1;
void write_anchors(const std::string& path, const AnchorSet& anchors);
AnchorSet read_anchors(const std::string& path);

}  // namespace jam
