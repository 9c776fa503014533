#pragma once

#include "jam/geometry.hpp"
#include "jam/nn.hpp"
#include "jam/scene.hpp"
#include "jam/taxonomy.hpp"
#include "jam/tensor.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace jam {

/// Framework variants. The first four are the comparison set; the last two
/// are JAM ablations.
enum class Variant { MarginalFree, MarginalAware, JointOneStep, Jam, JamNoKeypoints, JamNoClass };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  SceneDims dims = SceneDims::micro();
  int d_model = 32;         // D_dim
  int encoder_layers = 2;   // E
  int heads = 4;
  int y_m = 8;              // stage-1 categories
  int k_m = 1;              // stage-1 modes per category
  int k_j = 3;              // joint modes
  int y_j = 1;              // joint categories, always 1
  int joint_proposals = 6;  // joint-onestep proposer queries
  CategoryScheme scheme = CategoryScheme::Behavior8;
  Variant variant = Variant::Jam;
  double position_scale = 10.0;  // m per network unit; m/s for velocities
  std::array<double, 3> keypoint_times{3.0, 5.0, 8.0};  // s

  static ModelConfig micro() { return {}; }
  static ModelConfig desk();

  int stage1_modes() const { return y_m * k_m; }
  bool has_stage2() const { return variant != Variant::MarginalFree && variant != Variant::MarginalAware; }
  bool joint_proposer() const { return variant == Variant::JointOneStep; }
  bool use_keypoints() const { return variant != Variant::JamNoKeypoints; }
  /// Step indices of the keypoint times (nearest step, clamped to the horizon).
  std::array<int, 3> keypoint_steps() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Rewrites the query layout for a variant: marginal-free uses 64 free
/// queries, marginal-aware 8 behavior categories x 3, jam-noclass Y_m*K_m
/// free queries, the rest keep the base layout.
ModelConfig apply_variant(ModelConfig base, Variant v);

/// Per-step Gaussian trajectory. steps is T x 4: mu_x, mu_y, sigma_x, sigma_y.
struct GaussianTrajectory {
  Matrix steps;
  double score = 0.0;
  Points2<double> means() const { return steps.leftCols(2); }
};

struct Proposal {
  GaussianTrajectory trajectory;
  Matrix keypoints;  // 3 x 4: x, y, vx, vy
  RowVector content;
  int category = 0;
  int mode = 0;   // within-category index
  int agent = 0;  // 0 or 1 within the interacting pair
};

struct JointMode {
  std::array<Matrix, 2> steps;  // T x 4 per interacting agent
  double score = 0.0;
};

struct JointPrediction {
  std::vector<JointMode> modes;
};

/// Stage outputs in the agents' local frames. means and sigma are
/// (modes x 2T) with x, y interleaved per step; means are in meters.
struct MarginalHeads {
  std::array<Var, 2> means;
  std::array<Var, 2> sigma;
  std::array<Var, 2> logits;   // 1 x modes each
  std::array<Var, 2> content;  // modes x D
};

struct JointHeads {
  std::array<Var, 2> means;
  std::array<Var, 2> sigma;
  Var logits;  // 1 x modes, shared by the pair
  Var content;
};

/// Numeric inputs of one scene, all in local frames.
struct SceneFeatures {
  Pose2d anchor;
  std::vector<Pose2d> frames;   // per agent
  std::vector<bool> present;    // per agent
  std::vector<int> types;       // per agent
  Matrix history;               // (agents * T_h) x 7
  Mask history_valid;           // agents x T_h
  Matrix agent_origin;          // agents x D
  Matrix map_points;            // (agents * N_m * N_p) x 7
  std::vector<bool> point_valid;
  std::vector<bool> element_valid;  // agents * N_m
  Matrix element_origin;        // (agents * N_m) x D
  std::array<int, 2> interacting{0, 1};

  int token_count() const { return static_cast<int>(present.size() + element_valid.size()); }
  std::vector<bool> token_valid() const;
};

SceneFeatures extract_features(const SceneSample& scene, const ModelConfig& cfg);

struct ForwardPass {
  Var scene_tokens;
  std::optional<MarginalHeads> marginal;
  std::optional<JointHeads> proposer;
  std::optional<JointHeads> joint;
  std::array<Pose2d, 2> frames;
};

/// Interacting-pair prediction in global coordinates.
struct Prediction {
  std::array<std::vector<Proposal>, 2> proposals;
  JointPrediction joint;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  Var encode_history(Graph& g, const SceneFeatures& f) const;
  Var encode_map(Graph& g, const SceneFeatures& f) const;
  Var encode_scene(Graph& g, Var tokens, const std::vector<bool>& valid) const;
  /// means: (P x 2T) local meters -> P x D.
  Var encode_future(Graph& g, Var means, int agent_type) const;
  /// keypoints: (P x 12) scaled x, y, vx, vy per keypoint -> P x D.
  Var encode_keypoints(Graph& g, Var keypoints, int agent_type) const;
  /// (P x 2T) means -> (P x 12) keypoints in meters and m/s.
  Var extract_keypoints(Graph& g, Var means) const;

  MarginalHeads propose_marginal(Graph& g, Var scene, const std::vector<bool>& valid, const SceneFeatures& f) const;
  JointHeads propose_joint(Graph& g, Var scene, const std::vector<bool>& valid, const SceneFeatures& f) const;
  JointHeads refine_joint(Graph& g, Var scene, const std::vector<bool>& valid, const SceneFeatures& f,
                          const std::array<Var, 2>& means, const std::array<Var, 2>& content) const;

  ForwardPass forward(Graph& g, const SceneFeatures& f) const;
  ForwardPass forward(Graph& g, const SceneSample& scene) const;

  Prediction predict(const SceneSample& scene) const;

 private:
  ModelConfig cfg_;
  ParameterStore store_;

  nn::LstmWeights lstm_;
  int null_token_ = -1;
  int type_embedding_ = -1;
  nn::Linear agent_origin_;
  nn::Mlp map_points_;
  nn::Linear map_origin_;
  std::vector<nn::AttentionBlock> encoder_;

  int mode_embedding_ = -1;
  int agent_index_ = -1;
  nn::AttentionBlock mode2scene_;
  nn::AttentionBlock after_mode2mode_;
  nn::Mlp marginal_head_;

  int proposer_embedding_ = -1;
  nn::Linear proposer_pair_;
  nn::AttentionBlock proposer_mode2scene_;
  nn::AttentionBlock proposer_after_;
  nn::Mlp proposer_head_;

  nn::Mlp future_mlp_;
  nn::Mlp keypoint_mlp_;
  int proposal_agent_index_ = -1;
  nn::AttentionBlock before_mode2mode_;
  nn::AttentionBlock agent2agent_;
  int joint_embedding_ = -1;
  nn::Linear joint_history_;
  nn::Linear joint_agents_;
  nn::AttentionBlock joint_mode2scene_;
  nn::AttentionBlock joint_after_;
  nn::Mlp joint_head_;

  Matrix integrate_;     // 2T x 2T
  Matrix keypoint_map_;  // 2T x 12
};

/// Pairs the r-th ranked mode of each agent for r < k; joint score is the
/// renormalized product of marginal scores.
JointPrediction pair_marginals(const std::array<std::vector<GaussianTrajectory>, 2>& modes, int k);

/// Maps a local-frame trajectory (T x 4) to global coordinates. Sigmas stay
/// in the agent frame.
Matrix trajectory_to_global(const Matrix& local, const Pose2d& frame);

}  // namespace jam
