#pragma once

#include "jam/geometry.hpp"
#include "jam/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jam {

enum class AgentType : int { Vehicle = 0, Pedestrian = 1, Cyclist = 2 };
inline constexpr int kAgentTypeCount = 3;
std::string to_string(AgentType t);

enum class ScenarioKind : int { Crossing = 0, Merge = 1, Yield = 2, Follow = 3, TurnConflict = 4 };
inline constexpr int kScenarioKindCount = 5;
std::string to_string(ScenarioKind k);
/// Throws std::invalid_argument for unknown names.
ScenarioKind parse_scenario_kind(const std::string& name);

enum class LaneType : int { None = 0, Lane = 1, Crosswalk = 2 };

/// History state columns.
enum StateColumn : int { kStateX = 0, kStateY, kStateHeading, kStateVx, kStateVy, kStateValid };
/// Map point columns.
enum PointColumn : int { kPointX = 0, kPointY, kPointDx, kPointDy, kPointType };

struct SceneDims {
  int agents = 34;        // N_a: 2 interacting + neighbors
  int history = 11;       // T_h
  int future = 80;        // T
  int map_elements = 8;   // N_m per agent
  int map_points = 20;    // N_p per element
  double sample_rate_hz = 10.0;

  static constexpr int state_dim = 6;  // d_s
  static constexpr int point_dim = 5;  // d_p

  static SceneDims desk() { return {}; }
  /// Small profile used by tests and desk-scale experiments.
  static SceneDims micro() { return SceneDims{6, 3, 16, 4, 10, 2.0}; }

  bool operator==(const SceneDims&) const = default;
};

/// One interactive scene in global coordinates.
///
/// Row layouts (agent-major):
///   histories: (agents * history) x 6    [x, y, heading, vx, vy, valid]
///   map:       (agents * map_elements * map_points) x 5 [x, y, dx, dy, lane type]
///   futures:   (agents * future) x 2
/// Missing entries are zero; invalid history steps have valid = 0, padded map
/// points have lane type 0.
struct SceneSample {
  SceneDims dims;
  ScenarioKind kind = ScenarioKind::Crossing;
  std::array<int, 2> interacting{0, 1};
  std::vector<AgentType> agent_types;
  bool low_probability_maneuver = false;  // scene generated with a U-turn
  Matrix histories;
  Matrix map;
  Matrix futures;

  Index history_row(int agent, int step) const { return Index(agent) * dims.history + step; }
  Index map_row(int agent, int element, int point) const {
    return (Index(agent) * dims.map_elements + element) * dims.map_points + point;
  }
  Index future_row(int agent, int step) const { return Index(agent) * dims.future + step; }

  bool step_valid(int agent, int step) const { return histories(history_row(agent, step), kStateValid) > 0.5; }
  bool agent_present(int agent) const;
  /// Last valid history pose; throws if the agent has no valid step.
  Pose2d current_pose(int agent) const;
  /// (future x 2) block of one agent.
  Points2<double> future_of(int agent) const;

  bool operator==(const SceneSample&) const = default;
};

/// Midpoint of the interacting agents' current positions, heading of the
/// first interacting agent.
Pose2d scene_anchor(const SceneSample& scene);

struct GenerationOptions {
  SceneDims dims = SceneDims::desk();
  /// Forces (true) or forbids (false) the U-turn maneuver.
  bool uturn = false;
};

/// Deterministic in (kind, seed, options).
SceneSample generate_scene(ScenarioKind kind, std::uint64_t seed, const GenerationOptions& options = {});

/// Applies g to every valid position, heading, velocity and map direction.
SceneSample rigid_transform_scene(const SceneSample& scene, const RigidTransform2d& g);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetSpec {
  int scenes = 1;
  std::map<ScenarioKind, double> mix{{ScenarioKind::Crossing, 1.0}};
  double uturn_rate = 0.0;
  SceneDims dims = SceneDims::desk();
};

/// Parses "crossing:0.4,merge:0.6".
std::map<ScenarioKind, double> parse_kind_mix(const std::string& text);

struct DatasetHeader {
  std::uint32_t version = 1;
  SceneDims dims;
  std::uint32_t scenes = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<SceneSample> scenes;
};

Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

class DatasetError : public std::runtime_error {
 public:
  enum class Code { BadMagic, VersionMismatch, Truncated, CountMismatch, Checksum, Invalid };
  DatasetError(Code c, std::string field, const std::string& msg)
      : std::runtime_error(msg), code(c), field(std::move(field)) {}
  Code code;
  std::string field;
};

/// Layout: "JAMD" | u32 version | u32 scenes, agents, history, future,
/// map_elements, map_points, state_dim, point_dim | f32 sample_rate_hz |
/// u64 seed | scenes x fixed-stride f32 block | u32 CRC32 of all prior bytes.
/// Scene block: kind, interacting[0], interacting[1], U-turn flag,
/// agent types (agents), histories, map, futures.
inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

}  // namespace jam
