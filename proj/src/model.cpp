#include "jam/model.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jam {

namespace {

constexpr int kHistoryFeatures = 7;
constexpr int kPointFeatures = 7;
constexpr double kSigmaMin = 1e-3;
constexpr double kSigmaMax = 1e3;

Mask key_mask(Index rows, const std::vector<bool>& valid) {
  Mask m(rows, static_cast<Index>(valid.size()));
  for (Index j = 0; j < m.cols(); ++j) m.col(j).setConstant(valid[static_cast<std::size_t>(j)]);
  return m;
}

Mask block_diagonal(Index blocks, Index size) {
  Mask m = Mask::Constant(blocks * size, blocks * size, false);
  for (Index b = 0; b < blocks; ++b) m.block(b * size, b * size, size, size).setConstant(true);
  return m;
}

Matrix row_mask(const std::vector<bool>& keep, Index cols) {
  Matrix m(static_cast<Index>(keep.size()), cols);
  for (Index r = 0; r < m.rows(); ++r) m.row(r).setConstant(keep[static_cast<std::size_t>(r)] ? 1.0 : 0.0);
  return m;
}

RowVector softmax(const RowVector& logits) {
  const double mx = logits.maxCoeff();
  RowVector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::MarginalFree: return "marginal-free";
    case Variant::MarginalAware: return "marginal-aware";
    case Variant::JointOneStep: return "joint-onestep";
    case Variant::Jam: return "jam";
    case Variant::JamNoKeypoints: return "jam-nokp";
    case Variant::JamNoClass: return "jam-noclass";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (const auto v : {Variant::MarginalFree, Variant::MarginalAware, Variant::JointOneStep, Variant::Jam,
                       Variant::JamNoKeypoints, Variant::JamNoClass}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "'");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.dims = SceneDims::desk();
  c.d_model = 256;
  c.encoder_layers = 6;
  c.heads = 8;
  c.y_m = 64;
  c.k_m = 1;
  c.k_j = 6;
  c.scheme = CategoryScheme::Anchor64;
  return c;
}

std::array<int, 3> ModelConfig::keypoint_steps() const {
  std::array<int, 3> steps{};
  for (std::size_t k = 0; k < 3; ++k) {
    const int s = static_cast<int>(std::lround(keypoint_times[k] * dims.sample_rate_hz)) - 1;
    steps[k] = std::clamp(s, 0, dims.future - 1);
  }
  return steps;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (d_model <= 0 || d_model % 2 != 0) fail("D_dim must be positive and even");
  if (heads <= 0 || d_model % heads != 0) fail("D_dim must be divisible by heads");
  if (encoder_layers < 0) fail("E must be >= 0");
  if (y_m < 1 || k_m < 1 || k_j < 1 || joint_proposals < 1) fail("mode counts must be >= 1");
  if (y_j != 1) fail("Y_j must be 1");
  if (position_scale <= 0.0) fail("position scale must be positive");
  if (dims.agents < 2 || dims.history < 1 || dims.future < 2) fail("invalid scene dimensions");
  if (scheme == CategoryScheme::Behavior8 && y_m != kBehaviorCategoryCount) fail("behavior8 needs Y_m = 8");
  if (scheme == CategoryScheme::None && y_m != 1) fail("scheme none needs Y_m = 1");
  const int marginal = joint_proposer() ? joint_proposals : stage1_modes();
  if (!has_stage2() && marginal < k_j) fail("marginal variants need at least K_j modes per agent");
}

ModelConfig apply_variant(ModelConfig base, Variant v) {
  base.variant = v;
  switch (v) {
    case Variant::MarginalFree:
      base.scheme = CategoryScheme::None;
      base.y_m = 1;
      base.k_m = 64;
      break;
    case Variant::MarginalAware:
      base.scheme = CategoryScheme::Behavior8;
      base.y_m = 8;
      base.k_m = 3;
      break;
    case Variant::JamNoClass:
      base.k_m = base.y_m * base.k_m;
      base.y_m = 1;
      base.scheme = CategoryScheme::None;
      break;
    case Variant::JointOneStep:
    case Variant::Jam:
    case Variant::JamNoKeypoints:
      break;
  }
  return base;
}

// ---------------------------------------------------------------------------

std::vector<bool> SceneFeatures::token_valid() const {
  std::vector<bool> v(present);
  v.insert(v.end(), element_valid.begin(), element_valid.end());
  return v;
}

SceneFeatures extract_features(const SceneSample& scene, const ModelConfig& cfg) {
  const auto& d = scene.dims;
  if (!(d == cfg.dims)) throw std::invalid_argument("extract_features: scene dimensions differ from model config");
  const double inv = 1.0 / cfg.position_scale;
  const int na = d.agents;
  SceneFeatures f;
  f.anchor = scene_anchor(scene);
  f.interacting = scene.interacting;
  f.frames.resize(static_cast<std::size_t>(na));
  f.present.resize(static_cast<std::size_t>(na));
  f.types.resize(static_cast<std::size_t>(na));
  f.history = Matrix::Zero(Index(na) * d.history, kHistoryFeatures);
  f.history_valid = Mask::Constant(na, d.history, false);
  f.agent_origin = Matrix::Zero(na, cfg.d_model);
  for (int a = 0; a < na; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    f.present[ai] = scene.agent_present(a);
    f.types[ai] = static_cast<int>(scene.agent_types[ai]);
    f.frames[ai] = f.present[ai] ? scene.current_pose(a) : f.anchor;
    const Pose2d& frame = f.frames[ai];
    if (!f.present[ai]) spdlog::debug("agent {} has no valid history step; using the null token", a);
    for (int t = 0; t < d.history; ++t) {
      if (!scene.step_valid(a, t)) continue;
      const auto r = scene.history_row(a, t);
      const Pose2d p(scene.histories(r, kStateX), scene.histories(r, kStateY), scene.histories(r, kStateHeading));
      const Pose2d rel = relative_pose(p, frame);
      const Eigen::Vector2d v =
          vector_to_local(Eigen::Vector2d(scene.histories(r, kStateVx), scene.histories(r, kStateVy)), frame);
      f.history.row(r) << rel.x * inv, rel.y * inv, std::cos(rel.heading), std::sin(rel.heading), v.x() * inv,
          v.y() * inv, 1.0;
      f.history_valid(a, t) = true;
    }
    if (f.present[ai]) f.agent_origin.row(a) = encode_origin(frame, f.anchor, cfg.d_model);
  }

  const Index elements = Index(na) * d.map_elements;
  f.map_points = Matrix::Zero(elements * d.map_points, kPointFeatures);
  f.point_valid.assign(static_cast<std::size_t>(elements * d.map_points), false);
  f.element_valid.assign(static_cast<std::size_t>(elements), false);
  f.element_origin = Matrix::Zero(elements, cfg.d_model);
  for (int a = 0; a < na; ++a) {
    for (int e = 0; e < d.map_elements; ++e) {
      const Index el = Index(a) * d.map_elements + e;
      int first = -1;
      for (int p = 0; p < d.map_points; ++p) {
        if (std::lround(scene.map(scene.map_row(a, e, p), kPointType)) != 0) {
          first = p;
          break;
        }
      }
      if (first < 0) continue;
      const auto r0 = scene.map_row(a, e, first);
      const Eigen::Vector2d dir(scene.map(r0, kPointDx), scene.map(r0, kPointDy));
      const double heading = dir.norm() > 1e-9 ? std::atan2(dir.y(), dir.x()) : f.frames[static_cast<std::size_t>(a)].heading;
      const Pose2d frame(scene.map(r0, kPointX), scene.map(r0, kPointY), heading);
      f.element_valid[static_cast<std::size_t>(el)] = true;
      f.element_origin.row(el) = encode_origin(frame, f.anchor, cfg.d_model);
      for (int p = 0; p < d.map_points; ++p) {
        const auto r = scene.map_row(a, e, p);
        const long type = std::lround(scene.map(r, kPointType));
        if (type <= 0 || type > 2) continue;
        const Points2<double> pt = to_local(scene.map.block(r, kPointX, 1, 2), frame);
        const Eigen::Vector2d v = vector_to_local(Eigen::Vector2d(scene.map(r, kPointDx), scene.map(r, kPointDy)), frame);
        const Index out = el * d.map_points + p;
        f.map_points.row(out) << pt(0, 0) * inv, pt(0, 1) * inv, v.x(), v.y(), 0.0, 0.0, 0.0;
        f.map_points(out, 3 + type) = 1.0;
        f.map_points(out, 6) = 1.0;
        f.point_valid[static_cast<std::size_t>(out)] = true;
      }
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const Index d = cfg_.d_model;
  const int h = cfg_.heads;
  const Index t2 = 2 * Index(cfg_.dims.future);

  lstm_ = nn::LstmWeights::create(store_, "history.lstm", kHistoryFeatures, d, rng);
  null_token_ = store_.add("history.null", nn::xavier_uniform(1, d, rng));
  type_embedding_ = store_.add("type_embedding", nn::xavier_uniform(kAgentTypeCount, d, rng));
  agent_origin_ = nn::Linear::create(store_, "history.origin", d, d, rng);
  map_points_ = nn::Mlp::create(store_, "map.points", kPointFeatures, d, d, rng);
  map_origin_ = nn::Linear::create(store_, "map.origin", d, d, rng);
  for (int e = 0; e < cfg_.encoder_layers; ++e) {
    encoder_.push_back(nn::AttentionBlock::create(store_, "encoder." + std::to_string(e), d, h, rng));
  }

  if (cfg_.joint_proposer()) {
    proposer_embedding_ = store_.add("proposer.mode_embedding", nn::xavier_uniform(cfg_.joint_proposals, d, rng));
    proposer_pair_ = nn::Linear::create(store_, "proposer.pair", 2 * d, d, rng);
    proposer_mode2scene_ = nn::AttentionBlock::create(store_, "proposer.mode2scene", d, h, rng);
    proposer_after_ = nn::AttentionBlock::create(store_, "proposer.after_mode2mode", d, h, rng);
    proposer_head_ = nn::Mlp::create(store_, "proposer.head", d, d, 4 * t2 + 1, rng);
  } else {
    mode_embedding_ = store_.add("marginal.mode_embedding", nn::xavier_uniform(cfg_.stage1_modes(), d, rng));
    agent_index_ = store_.add("marginal.agent_index", nn::xavier_uniform(2, d, rng));
    mode2scene_ = nn::AttentionBlock::create(store_, "marginal.mode2scene", d, h, rng);
    after_mode2mode_ = nn::AttentionBlock::create(store_, "marginal.after_mode2mode", d, h, rng);
    marginal_head_ = nn::Mlp::create(store_, "marginal.head", d, d, 2 * t2 + 1, rng);
  }

  if (cfg_.has_stage2()) {
    future_mlp_ = nn::Mlp::create(store_, "joint.future", 2, d, d, rng);
    if (cfg_.use_keypoints()) keypoint_mlp_ = nn::Mlp::create(store_, "joint.keypoints", 4, d, d, rng);
    proposal_agent_index_ = store_.add("joint.agent_index", nn::xavier_uniform(2, d, rng));
    before_mode2mode_ = nn::AttentionBlock::create(store_, "joint.before_mode2mode", d, h, rng);
    agent2agent_ = nn::AttentionBlock::create(store_, "joint.agent2agent", d, h, rng);
    joint_embedding_ = store_.add("joint.mode_embedding", nn::xavier_uniform(cfg_.k_j, d, rng));
    joint_history_ = nn::Linear::create(store_, "joint.history", 2 * d, d, rng);
    joint_agents_ = nn::Linear::create(store_, "joint.agents", 2 * d, d, rng);
    joint_mode2scene_ = nn::AttentionBlock::create(store_, "joint.mode2scene", d, h, rng);
    joint_after_ = nn::AttentionBlock::create(store_, "joint.after_mode2mode", d, h, rng);
    joint_head_ = nn::Mlp::create(store_, "joint.head", d, d, 4 * t2 + 1, rng);
  }

  // Heads emit per-step displacements in units of position_scale per second;
  // means are their running sum.
  integrate_ = Matrix::Zero(t2, t2);
  const double step_scale = cfg_.position_scale / cfg_.dims.sample_rate_hz;
  for (Index a = 0; a < t2; ++a) {
    for (Index b = a; b < t2; b += 2) integrate_(a, b) = step_scale;
  }

  // Keypoint positions and backward-difference velocities as a linear map of
  // the interleaved means.
  keypoint_map_ = Matrix::Zero(t2, 12);
  const double hz = cfg_.dims.sample_rate_hz;
  const auto steps = cfg_.keypoint_steps();
  for (Index k = 0; k < 3; ++k) {
    const Index s = steps[static_cast<std::size_t>(k)];
    for (Index c = 0; c < 2; ++c) {
      keypoint_map_(2 * s + c, 4 * k + c) = 1.0;
      keypoint_map_(2 * s + c, 4 * k + 2 + c) = hz;
      if (s > 0) keypoint_map_(2 * (s - 1) + c, 4 * k + 2 + c) = -hz;
    }
  }
}

Var Model::encode_history(Graph& g, const SceneFeatures& f) const {
  const Index na = static_cast<Index>(f.present.size());
  const Index d = cfg_.d_model;
  const int th = cfg_.dims.history;
  nn::LstmState state{g.constant(Matrix::Zero(na, d)), g.constant(Matrix::Zero(na, d))};
  for (int t = 0; t < th; ++t) {
    Matrix x(na, kHistoryFeatures);
    std::vector<bool> valid(static_cast<std::size_t>(na));
    for (Index a = 0; a < na; ++a) {
      x.row(a) = f.history.row(a * th + t);
      valid[static_cast<std::size_t>(a)] = f.history_valid(a, t);
    }
    const auto n_valid = std::count(valid.begin(), valid.end(), true);
    if (n_valid == 0) continue;
    const nn::LstmState next = nn::lstm_step(g, lstm_, g.constant(std::move(x)), state);
    if (n_valid == na) {
      state = next;
      continue;
    }
    const Matrix keep = row_mask(valid, d);
    const Var k = g.constant(keep), nk = g.constant(Matrix::Ones(na, d) - keep);
    state.hidden = add(mul(next.hidden, k), mul(state.hidden, nk));
    state.cell = add(mul(next.cell, k), mul(state.cell, nk));
  }
  Var hidden = state.hidden;
  if (std::find(f.present.begin(), f.present.end(), false) != f.present.end()) {
    const Matrix keep = row_mask(f.present, d);
    hidden = add(mul(hidden, g.constant(keep)),
                 mul(broadcast_rows(g.param(null_token_), na), g.constant(Matrix::Ones(na, d) - keep)));
  }
  const Var origin = agent_origin_(g, g.constant(f.agent_origin));
  return add(add(hidden, origin), gather_rows(g.param(type_embedding_), f.types));
}

Var Model::encode_map(Graph& g, const SceneFeatures& f) const {
  const Var points = map_points_(g, g.constant(f.map_points));
  const Var pooled = segment_max(points, cfg_.dims.map_points, f.point_valid);
  return add(pooled, map_origin_(g, g.constant(f.element_origin)));
}

Var Model::encode_scene(Graph& g, Var tokens, const std::vector<bool>& valid) const {
  const Mask mask = key_mask(tokens.rows(), valid);
  for (const auto& layer : encoder_) tokens = layer(g, tokens, tokens, mask);
  return tokens;
}

Var Model::encode_future(Graph& g, Var means, int agent_type) const {
  const Index p = means.rows(), t = cfg_.dims.future;
  const Var steps = reshape(scale(means, 1.0 / cfg_.position_scale), p * t, 2);
  const Var pooled = segment_max(future_mlp_(g, steps), t);
  return add_row(pooled, row(g.param(type_embedding_), agent_type));
}

Var Model::encode_keypoints(Graph& g, Var keypoints, int agent_type) const {
  const Index p = keypoints.rows();
  const Var pooled = segment_mean(keypoint_mlp_(g, reshape(keypoints, p * 3, 4)), 3);
  return add_row(pooled, row(g.param(type_embedding_), agent_type));
}

Var Model::extract_keypoints(Graph& g, Var means) const { return matmul(means, g.constant(keypoint_map_)); }

MarginalHeads Model::propose_marginal(Graph& g, Var scene, const std::vector<bool>& valid,
                                      const SceneFeatures& f) const {
  const Index p = cfg_.stage1_modes();
  const Index t2 = 2 * Index(cfg_.dims.future);
  const Var modes = g.param(mode_embedding_);
  const Var agent_index = g.param(agent_index_);
  std::vector<Var> queries;
  for (int i = 0; i < 2; ++i) {
    queries.push_back(add_row(add_row(modes, row(agent_index, i)), row(scene, f.interacting[static_cast<std::size_t>(i)])));
  }
  Var q = concat_rows(queries);
  q = mode2scene_(g, q, scene, key_mask(2 * p, valid));
  q = after_mode2mode_(g, q, q, block_diagonal(2, p));
  const Var out = marginal_head_(g, q);
  const Var integrate = g.constant(integrate_);
  MarginalHeads heads;
  for (std::size_t i = 0; i < 2; ++i) {
    const Var rows = slice_rows(out, Index(i) * p, p);
    heads.means[i] = matmul(slice_cols(rows, 0, t2), integrate);
    heads.sigma[i] = exp_clamped(slice_cols(rows, t2, t2), kSigmaMin, kSigmaMax);
    heads.logits[i] = reshape(slice_cols(rows, 2 * t2, 1), 1, p);
    heads.content[i] = slice_rows(q, Index(i) * p, p);
  }
  return heads;
}

namespace {

JointHeads split_joint(Var out, Var content, const Matrix& integrate) {
  const Index t2 = integrate.rows();
  const Var integ = out.graph().constant(integrate);
  JointHeads heads;
  for (std::size_t i = 0; i < 2; ++i) {
    const Index base = Index(i) * 2 * t2;
    heads.means[i] = matmul(slice_cols(out, base, t2), integ);
    heads.sigma[i] = exp_clamped(slice_cols(out, base + t2, t2), kSigmaMin, kSigmaMax);
  }
  heads.logits = reshape(slice_cols(out, 4 * t2, 1), 1, out.rows());
  heads.content = content;
  return heads;
}

}  // namespace

JointHeads Model::propose_joint(Graph& g, Var scene, const std::vector<bool>& valid, const SceneFeatures& f) const {
  const Index k = cfg_.joint_proposals;
  const Var pair = concat_cols({row(scene, f.interacting[0]), row(scene, f.interacting[1])});
  Var q = add_row(g.param(proposer_embedding_), proposer_pair_(g, pair));
  q = proposer_mode2scene_(g, q, scene, key_mask(k, valid));
  q = proposer_after_(g, q, q, Mask());
  return split_joint(proposer_head_(g, q), q, integrate_);
}

JointHeads Model::refine_joint(Graph& g, Var scene, const std::vector<bool>& valid, const SceneFeatures& f,
                               const std::array<Var, 2>& means, const std::array<Var, 2>& content) const {
  const Var agent_index = g.param(proposal_agent_index_);
  std::vector<Var> proposals;
  std::array<Index, 2> counts{};
  for (std::size_t i = 0; i < 2; ++i) {
    const int a = f.interacting[i];
    const int type = f.types[static_cast<std::size_t>(a)];
    Var tok = add(encode_future(g, means[i], type), content[i]);
    if (cfg_.use_keypoints()) {
      const Var kp = scale(extract_keypoints(g, means[i]), 1.0 / cfg_.position_scale);
      tok = add(tok, encode_keypoints(g, kp, type));
    }
    tok = add_row(add_row(tok, row(scene, a)), row(agent_index, Index(i)));
    counts[i] = tok.rows();
    proposals.push_back(tok);
  }
  Var props = concat_rows(proposals);
  props = before_mode2mode_(g, props, props, Mask());
  Var agents = concat_rows({mean_rows(slice_rows(props, 0, counts[0])), mean_rows(slice_rows(props, counts[0], counts[1]))});
  agents = agent2agent_(g, agents, agents, Mask());

  const Var history = concat_cols({row(scene, f.interacting[0]), row(scene, f.interacting[1])});
  const Var pair = concat_cols({row(agents, 0), row(agents, 1)});
  Var q = add_row(add_row(g.param(joint_embedding_), joint_history_(g, history)), joint_agents_(g, pair));

  const Var context = concat_rows({scene, props, agents});
  std::vector<bool> context_valid(valid);
  context_valid.resize(static_cast<std::size_t>(context.rows()), true);
  q = joint_mode2scene_(g, q, context, key_mask(cfg_.k_j, context_valid));
  q = joint_after_(g, q, q, Mask());
  return split_joint(joint_head_(g, q), q, integrate_);
}

ForwardPass Model::forward(Graph& g, const SceneFeatures& f) const {
  const Var tokens = concat_rows({encode_history(g, f), encode_map(g, f)});
  const std::vector<bool> valid = f.token_valid();
  ForwardPass out;
  out.scene_tokens = encode_scene(g, tokens, valid);
  out.frames = {f.frames[static_cast<std::size_t>(f.interacting[0])], f.frames[static_cast<std::size_t>(f.interacting[1])]};
  std::array<Var, 2> means, content;
  if (cfg_.joint_proposer()) {
    out.proposer = propose_joint(g, out.scene_tokens, valid, f);
    means = out.proposer->means;
    content = {out.proposer->content, out.proposer->content};
  } else {
    out.marginal = propose_marginal(g, out.scene_tokens, valid, f);
    means = out.marginal->means;
    content = out.marginal->content;
  }
  if (cfg_.has_stage2()) out.joint = refine_joint(g, out.scene_tokens, valid, f, means, content);
  return out;
}

ForwardPass Model::forward(Graph& g, const SceneSample& scene) const { return forward(g, extract_features(scene, cfg_)); }

// ---------------------------------------------------------------------------

Matrix trajectory_to_global(const Matrix& local, const Pose2d& frame) {
  Matrix out = local;
  out.leftCols(2) = to_global(local.leftCols(2), frame);
  return out;
}

namespace {

Matrix steps_of(const Var& means, const Var& sigma, Index r, Index t) {
  Matrix steps(t, 4);
  for (Index s = 0; s < t; ++s) {
    steps(s, 0) = means.value()(r, 2 * s);
    steps(s, 1) = means.value()(r, 2 * s + 1);
    steps(s, 2) = sigma.value()(r, 2 * s);
    steps(s, 3) = sigma.value()(r, 2 * s + 1);
  }
  return steps;
}

Matrix keypoints_to_global(const Matrix& kp, const Pose2d& frame) {
  Matrix out(3, 4);
  out.leftCols(2) = to_global(kp.leftCols(2), frame);
  for (Index k = 0; k < 3; ++k) {
    const double c = std::cos(frame.heading), s = std::sin(frame.heading);
    out(k, 2) = c * kp(k, 2) - s * kp(k, 3);
    out(k, 3) = s * kp(k, 2) + c * kp(k, 3);
  }
  return out;
}

}  // namespace

JointPrediction pair_marginals(const std::array<std::vector<GaussianTrajectory>, 2>& modes, int k) {
  std::array<std::vector<int>, 2> order;
  for (std::size_t i = 0; i < 2; ++i) {
    order[i].resize(modes[i].size());
    std::iota(order[i].begin(), order[i].end(), 0);
    std::stable_sort(order[i].begin(), order[i].end(), [&](int a, int b) {
      return modes[i][static_cast<std::size_t>(a)].score > modes[i][static_cast<std::size_t>(b)].score;
    });
  }
  const std::size_t n = std::min({static_cast<std::size_t>(k), modes[0].size(), modes[1].size()});
  JointPrediction joint;
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    JointMode m;
    const auto& a = modes[0][static_cast<std::size_t>(order[0][r])];
    const auto& b = modes[1][static_cast<std::size_t>(order[1][r])];
    m.steps = {a.steps, b.steps};
    m.score = a.score * b.score;
    total += m.score;
    joint.modes.push_back(std::move(m));
  }
  for (auto& m : joint.modes) m.score = total > 0.0 ? m.score / total : 1.0 / static_cast<double>(n);
  return joint;
}

Prediction Model::predict(const SceneSample& scene) const {
  Graph g(&store_);
  const SceneFeatures f = extract_features(scene, cfg_);
  const ForwardPass fp = forward(g, f);
  const Index t = cfg_.dims.future;
  Prediction pred;
  for (std::size_t i = 0; i < 2; ++i) {
    const Pose2d& frame = fp.frames[i];
    Var means, sigma, content;
    RowVector scores;
    if (fp.marginal) {
      means = fp.marginal->means[i];
      sigma = fp.marginal->sigma[i];
      content = fp.marginal->content[i];
      scores = softmax(fp.marginal->logits[i].value());
    } else {
      means = fp.proposer->means[i];
      sigma = fp.proposer->sigma[i];
      content = fp.proposer->content;
      scores = softmax(fp.proposer->logits.value());
    }
    const Matrix kp = means.value() * keypoint_map_;
    for (Index r = 0; r < means.rows(); ++r) {
      Proposal p;
      p.trajectory.steps = trajectory_to_global(steps_of(means, sigma, r, t), frame);
      p.trajectory.score = scores(r);
      p.keypoints = keypoints_to_global(Eigen::Map<const Matrix>(kp.row(r).data(), 3, 4), frame);
      p.content = content.value().row(r);
      p.category = fp.marginal ? static_cast<int>(r) / cfg_.k_m : 0;
      p.mode = fp.marginal ? static_cast<int>(r) % cfg_.k_m : static_cast<int>(r);
      p.agent = static_cast<int>(i);
      pred.proposals[i].push_back(std::move(p));
    }
  }
  if (fp.joint) {
    const RowVector scores = softmax(fp.joint->logits.value());
    for (Index r = 0; r < fp.joint->logits.cols(); ++r) {
      JointMode m;
      for (std::size_t i = 0; i < 2; ++i) {
        m.steps[i] = trajectory_to_global(steps_of(fp.joint->means[i], fp.joint->sigma[i], r, t), fp.frames[i]);
      }
      m.score = scores(r);
      pred.joint.modes.push_back(std::move(m));
    }
  } else {
    std::array<std::vector<GaussianTrajectory>, 2> marginal;
    for (std::size_t i = 0; i < 2; ++i) {
      for (const auto& p : pred.proposals[i]) marginal[i].push_back(p.trajectory);
    }
    pred.joint = pair_marginals(marginal, cfg_.k_j);
  }
  return pred;
}

}  // namespace jam
