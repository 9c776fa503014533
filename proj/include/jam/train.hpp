#pragma once

#include "jam/model.hpp"
#include "jam/objective.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace jam {

struct TrainOptions {
  int batch_size = 32;
  double base_lr = 1e-4;
  int decay_start = 20;  // first halved epoch (1-indexed)
  int decay_every = 2;
  int epochs = 30;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int threads = 0;  // 0: JAM_THREADS or 1
  std::string checkpoint_dir;  // empty: no checkpoints

  void validate() const;
};

/// base * 2^-n where n counts the elapsed decay periods at 1-indexed `epoch`.
double learning_rate(const TrainOptions& opt, int epoch);

/// Worker count: `requested` if positive, else JAM_THREADS, else 1.
int worker_threads(int requested = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

double global_norm(const Gradients& grads);
/// Rescales to `max_norm` when the global norm exceeds it; returns true when
/// clipping happened.
bool clip_gradients(Gradients& grads, double max_norm);

class Adam {
 public:
  Adam(const ParameterStore& store, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(ParameterStore& store, const Gradients& grads, double lr);
  int steps() const { return steps_; }

 private:
  double beta1_, beta2_, epsilon_;
  Gradients m_, v_;
  int steps_ = 0;
};

/// Loss of one scene; adds its parameter gradients into `grads` when given.
LossBreakdown scene_loss(const Model& model, const SceneSample& scene, const LossTargets& targets, Gradients* grads);

struct EpochSummary {
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown mean;
  int clipped_steps = 0;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  int steps = 0;
  bool aborted = false;
  std::string abort_reason;
  std::string last_checkpoint;
};

/// Header of the per-step training log.
inline constexpr const char* kTrainLogHeader = "step,epoch,lr,nll1,ce1,nll2,ce2,total";

/// Mini-batch training with Adam and global-norm clipping. Batches are
/// reshuffled per epoch from the seed; per-scene gradients are summed in
/// scene order, so results do not depend on the worker count. A non-finite
/// loss stops training before the offending update.
TrainResult train_model(Model& model, const std::vector<SceneSample>& scenes, const AnchorSet* anchors,
                        const TrainOptions& opt, std::ostream* log = nullptr,
                        const std::function<void(const EpochSummary&)>& on_epoch = {});

}  // namespace jam
