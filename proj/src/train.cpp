#include "jam/train.hpp"

#include "jam/checkpoint.hpp"
#include "jam/random.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <thread>

namespace jam {

void TrainOptions::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (!(base_lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (decay_start < 1 || decay_every < 1) throw std::invalid_argument("train: invalid decay schedule");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("train: clip norm must be positive");
}

double learning_rate(const TrainOptions& opt, int epoch) {
  if (epoch < 1) throw std::invalid_argument("learning_rate: epochs are 1-indexed");
  const int halvings = epoch < opt.decay_start ? 0 : (epoch - opt.decay_start) / opt.decay_every + 1;
  return std::ldexp(opt.base_lr, -halvings);
}

int worker_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("JAM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

bool clip_gradients(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm <= max_norm) return false;
  const double s = max_norm / norm;
  for (auto& g : grads) g *= s;
  return true;
}

Adam::Adam(const ParameterStore& store, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(zero_gradients(store)), v_(zero_gradients(store)) {}

void Adam::step(ParameterStore& store, const Gradients& grads, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, steps_);
  const double c2 = 1.0 - std::pow(beta2_, steps_);
  for (int p = 0; p < store.size(); ++p) {
    const auto i = static_cast<std::size_t>(p);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseAbs2();
    store[p].value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + epsilon_);
  }
}

LossBreakdown scene_loss(const Model& model, const SceneSample& scene, const LossTargets& targets, Gradients* grads) {
  Graph g(&model.parameters());
  const ForwardPass fp = model.forward(g, scene);
  const LossResult loss = total_loss(g, fp, targets, model.config());
  if (grads) {
    g.backward(loss.total);
    g.accumulate(*grads);
  }
  return loss.parts;
}

namespace {

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.nll1) && std::isfinite(l.ce1) && std::isfinite(l.nll2) && std::isfinite(l.ce2) &&
         std::isfinite(l.total);
}

}  // namespace

TrainResult train_model(Model& model, const std::vector<SceneSample>& scenes, const AnchorSet* anchors,
                        const TrainOptions& opt, std::ostream* log,
                        const std::function<void(const EpochSummary&)>& on_epoch) {
  opt.validate();
  if (scenes.empty()) throw std::invalid_argument("train: empty training set");
  const int threads = worker_threads(opt.threads);
  std::vector<LossTargets> targets;
  targets.reserve(scenes.size());
  for (const auto& s : scenes) targets.push_back(make_targets(s, model.config(), anchors));

  if (!opt.checkpoint_dir.empty()) std::filesystem::create_directories(opt.checkpoint_dir);
  if (log) *log << kTrainLogHeader << '\n';

  ParameterStore& store = model.parameters();
  Adam adam(store, opt.beta1, opt.beta2, opt.epsilon);
  TrainResult result;
  std::vector<int> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng rng = Rng::derive(opt.seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    const double lr = learning_rate(opt, epoch);
    EpochSummary summary;
    summary.epoch = epoch;
    summary.lr = lr;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size), order.size() - start));
      std::vector<Gradients> grads(static_cast<std::size_t>(n));
      std::vector<LossBreakdown> losses(static_cast<std::size_t>(n));
      std::vector<std::string> errors(static_cast<std::size_t>(n));
      parallel_for(n, threads, [&](int j) {
        const auto idx = static_cast<std::size_t>(order[start + static_cast<std::size_t>(j)]);
        auto& gj = grads[static_cast<std::size_t>(j)];
        gj = zero_gradients(store);
        try {
          losses[static_cast<std::size_t>(j)] = scene_loss(model, scenes[idx], targets[idx], &gj);
        } catch (const NonFiniteError& e) {
          errors[static_cast<std::size_t>(j)] = fmt::format("scene {}: {}", idx, e.what());
        }
      });
      LossBreakdown batch;
      Gradients total = std::move(grads[0]);
      for (int j = 0; j < n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        if (errors[jj].empty() && !finite(losses[jj])) {
          errors[jj] = fmt::format("scene {}: non-finite loss", order[start + jj]);
        }
        if (!errors[jj].empty()) {
          result.aborted = true;
          result.abort_reason = errors[jj];
          spdlog::error("training aborted at step {}: {}", result.steps + 1, errors[jj]);
          return result;
        }
        batch += losses[jj];
        if (j > 0) {
          for (std::size_t p = 0; p < total.size(); ++p) total[p] += grads[jj][p];
        }
      }
      const double inv = 1.0 / n;
      for (auto& g : total) g *= inv;
      batch = batch.scaled(inv);
      if (clip_gradients(total, opt.clip_norm)) {
        ++summary.clipped_steps;
        spdlog::debug("step {}: gradient clipped to norm {}", result.steps + 1, opt.clip_norm);
      }
      adam.step(store, total, lr);
      ++result.steps;
      summary.mean += batch.scaled(static_cast<double>(n) / static_cast<double>(scenes.size()));
      if (log) {
        *log << fmt::format("{},{},{},{},{},{},{},{}\n", result.steps, epoch, lr, batch.nll1, batch.ce1, batch.nll2,
                            batch.ce2, batch.total);
      }
    }
    if (summary.clipped_steps > 0) {
      spdlog::info("epoch {}: gradient clipping active on {} steps", epoch, summary.clipped_steps);
    }
    if (!opt.checkpoint_dir.empty()) {
      const auto path = (std::filesystem::path(opt.checkpoint_dir) / fmt::format("epoch_{:03d}.jamc", epoch)).string();
      save_checkpoint(path, store);
      result.last_checkpoint = path;
    }
    result.epochs.push_back(summary);
    if (on_epoch) on_epoch(summary);
  }
  return result;
}

}  // namespace jam
