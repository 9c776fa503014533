#pragma once

#include "jam/metrics.hpp"
#include "jam/model.hpp"
#include "jam/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jam {

/// Everything a run needs, loaded from a sectioned key-value file:
///
///   [data]   train, val, anchors, N_a, T_h, T, d_s, d_p, N_m, N_p, rate_hz
///   [model]  variant, scheme, Y_m, K_m, K_j, Y_j, K, E, D_dim, heads,
///            joint_proposals, position_scale
///   [train]  batch_size, lr, lr_decay_start, lr_decay_every, epochs, seed,
///            seeds, clip_norm, threads, out_dir
///   [eval]   horizons, thresholds
///   [compare] variants
///
/// Missing keys keep the micro defaults. K is the number of predicted joint
/// modes and must equal K_j.
struct RunConfig {
  ModelConfig model;
  TrainOptions train;
  ThresholdTable thresholds;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<Variant> variants{Variant::MarginalFree, Variant::MarginalAware, Variant::JointOneStep, Variant::Jam};
  std::string train_path;
  std::string val_path;
  std::string anchors_path;
  std::string out_dir = "runs";

  /// Throws std::invalid_argument when an invariant is broken (Y_j != 1,
  /// K != K_j, unsupported d_s or d_p, invalid model or schedule).
  void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& cfg);

}  // namespace jam
