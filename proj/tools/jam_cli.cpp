// Command-line front end: datagen, anchors, train, eval, compare, report.

#include "jam/checkpoint.hpp"
#include "jam/evaluate.hpp"
#include "jam/report.hpp"
#include "jam/run_config.hpp"
#include "jam/scene.hpp"
#include "jam/taxonomy.hpp"
#include "jam/train.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace {

jam::RunConfig load_config(const std::string& path) {
  return path.empty() ? jam::RunConfig{} : jam::load_run_config(path);
}

std::optional<jam::AnchorSet> load_anchors(const jam::RunConfig& cfg) {
  if (cfg.anchors_path.empty()) {
    if (cfg.model.scheme == jam::CategoryScheme::Anchor64) {
      throw std::invalid_argument("anchor64 scheme needs [data] anchors");
    }
    return std::nullopt;
  }
  return jam::read_anchors(cfg.anchors_path);
}

std::vector<jam::SceneSample> load_scenes(const std::string& path, const jam::ModelConfig& model) {
  auto ds = jam::read_dataset(path);
  if (!(ds.header.dims == model.dims)) {
    throw std::invalid_argument("dataset " + path + " dimensions differ from the run config");
  }
  return std::move(ds.scenes);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint multi-agent trajectory prediction toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "Generate a synthetic scene dataset");
  std::string dg_config, dg_out, dg_mix = "crossing:0.2,merge:0.2,yield:0.2,follow:0.2,turn-conflict:0.2";
  int dg_scenes = 2000;
  double dg_uturn = 0.2;
  std::uint64_t dg_seed = 1;
  datagen->add_option("-c,--config", dg_config, "Run config (dimensions)");
  datagen->add_option("-o,--out", dg_out, "Output dataset file")->required();
  datagen->add_option("-n,--scenes", dg_scenes, "Scene count")->check(CLI::PositiveNumber);
  datagen->add_option("--kind-mix", dg_mix, "Scenario mix, kind:weight,...");
  datagen->add_option("--uturn-rate", dg_uturn, "Fraction of scenes with a U-turn")->check(CLI::Range(0.0, 1.0));
  datagen->add_option("-s,--seed", dg_seed, "Generator seed");

  // anchors
  auto* anchors = app.add_subcommand("anchors", "Fit endpoint anchors per agent type");
  std::string an_data, an_out;
  int an_k = 64;
  std::uint64_t an_seed = 1;
  anchors->add_option("-d,--dataset,--data", an_data, "Training dataset")->required();
  anchors->add_option("-o,--out", an_out, "Output anchor file")->required();
  anchors->add_option("-k", an_k, "Anchors per type")->check(CLI::PositiveNumber);
  anchors->add_option("-s,--seed", an_seed, "Clustering seed");

  // train
  auto* train = app.add_subcommand("train", "Train one model");
  std::string tr_config, tr_out, tr_log, tr_variant;
  train->add_option("-c,--config", tr_config, "Run config")->required();
  train->add_option("-o,--out", tr_out, "Final checkpoint path")->required();
  train->add_option("--log", tr_log, "Training log CSV (default: next to the checkpoint)");
  train->add_option("--variant", tr_variant, "Override [model] variant");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_config, ev_ckpt, ev_data, ev_out, ev_variant;
  eval->add_option("-c,--config", ev_config, "Run config")->required();
  eval->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval->add_option("-d,--data", ev_data, "Dataset (default: [data] val)");
  eval->add_option("-o,--out", ev_out, "Metrics CSV (default: stdout)");
  eval->add_option("--variant", ev_variant, "Override [model] variant");

  // compare
  auto* compare = app.add_subcommand("compare", "Train and evaluate every variant on every seed");
  std::string cm_config, cm_out;
  compare->add_option("-c,--config", cm_config, "Run config")->required();
  compare->add_option("-o,--out", cm_out, "Report directory (default: [train] out_dir)");

  // report
  auto* report = app.add_subcommand("report", "Redraw charts from a results CSV");
  std::string rp_results, rp_out;
  report->add_option("-r,--results", rp_results, "results.csv from compare")->required();
  report->add_option("-o,--out", rp_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*datagen) {
      const auto cfg = load_config(dg_config);
      jam::DatasetSpec spec;
      spec.scenes = dg_scenes;
      spec.mix = jam::parse_kind_mix(dg_mix);
      spec.uturn_rate = dg_uturn;
      spec.dims = cfg.model.dims;
      ensure_parent(dg_out);
      jam::write_dataset(dg_out, jam::generate_dataset(spec, dg_seed));
      spdlog::info("wrote {} scenes to {}", dg_scenes, dg_out);
    } else if (*anchors) {
      const auto ds = jam::read_dataset(an_data);
      const auto set = jam::fit_anchors(ds.scenes, an_k, an_seed);
      for (int t = 0; t < jam::kAgentTypeCount; ++t) {
        const auto type = static_cast<jam::AgentType>(t);
        if (set.has(type)) {
          spdlog::info("{}: {} anchors, inertia {:.3f}", jam::to_string(type), an_k, set.inertia[static_cast<std::size_t>(t)]);
        } else {
          spdlog::warn("{}: too few distinct endpoints, no anchors", jam::to_string(type));
        }
      }
      ensure_parent(an_out);
      jam::write_anchors(an_out, set);
    } else if (*train) {
      auto cfg = load_config(tr_config);
      if (!tr_variant.empty()) cfg.model.variant = jam::parse_variant(tr_variant);
      const auto model_cfg = jam::apply_variant(cfg.model, cfg.model.variant);
      const auto anchor_set = load_anchors(cfg);
      const auto scenes = load_scenes(cfg.train_path, model_cfg);
      jam::TrainOptions opt = cfg.train;
      opt.checkpoint_dir = (fs::path(tr_out).parent_path() / "checkpoints").string();
      const std::string log_path = tr_log.empty() ? fs::path(tr_out).replace_extension(".log.csv").string() : tr_log;
      ensure_parent(tr_out);
      ensure_parent(log_path);
      std::ofstream log(log_path);
      if (!log) throw std::runtime_error("cannot open " + log_path);
      jam::Model model(model_cfg, opt.seed);
      spdlog::info("{}: {} parameters, {} scenes", jam::to_string(model_cfg.variant), model.parameters().scalar_count(),
                   scenes.size());
      const auto result = jam::train_model(model, scenes, anchor_set ? &*anchor_set : nullptr, opt, &log,
                                           [](const jam::EpochSummary& e) {
                                             spdlog::info("epoch {} lr {:.3g} loss {:.4f}", e.epoch, e.lr, e.mean.total);
                                           });
      if (result.aborted) {
        spdlog::error("training aborted: {}; last good checkpoint: {}", result.abort_reason,
                      result.last_checkpoint.empty() ? "none" : result.last_checkpoint);
        return 2;
      }
      jam::save_checkpoint(tr_out, model.parameters());
      spdlog::info("wrote {}", tr_out);
    } else if (*eval) {
      auto cfg = load_config(ev_config);
      if (!ev_variant.empty()) cfg.model.variant = jam::parse_variant(ev_variant);
      const auto model_cfg = jam::apply_variant(cfg.model, cfg.model.variant);
      const auto scenes = load_scenes(ev_data.empty() ? cfg.val_path : ev_data, model_cfg);
      jam::Model model(model_cfg, 0);
      jam::assign_parameters(model.parameters(), jam::load_checkpoint(ev_ckpt));
      const auto res = jam::evaluate_model(model, scenes, cfg.thresholds, jam::to_string(model_cfg.variant), cfg.train.threads);
      if (ev_out.empty()) {
        jam::write_metrics_csv(std::cout, res.rows);
      } else {
        ensure_parent(ev_out);
        std::ofstream out(ev_out);
        jam::write_metrics_csv(out, res.rows);
        if (!out) throw std::runtime_error("cannot write " + ev_out);
      }
      spdlog::info("minADE {:.4f} minFDE {:.4f} miss rate {:.4f} mAP {:.4f}", res.summary.min_ade, res.summary.min_fde,
                   res.summary.miss_rate, res.summary.map);
    } else if (*compare) {
      const auto cfg = load_config(cm_config);
      const auto anchor_set = load_anchors(cfg);
      const auto train_scenes = load_scenes(cfg.train_path, cfg.model);
      const auto val_scenes = load_scenes(cfg.val_path, cfg.model);
      jam::CompareOptions opt;
      opt.base = cfg.model;
      opt.train = cfg.train;
      opt.train.checkpoint_dir.clear();
      opt.variants = cfg.variants;
      opt.seeds = cfg.seeds;
      opt.thresholds = cfg.thresholds;
      opt.anchors = anchor_set ? &*anchor_set : nullptr;
      opt.progress = [](const std::string& msg) { spdlog::info("{}", msg); };
      const auto table = jam::compare_frameworks(train_scenes, val_scenes, opt);
      const auto files = jam::emit_report(cm_out.empty() ? cfg.out_dir : cm_out, table, &val_scenes.front());
      for (const auto& p : files.paths) spdlog::info("wrote {}", p);
      if (!table.complete) {
        spdlog::error("comparison incomplete");
        return 2;
      }
    } else if (*report) {
      std::ifstream in(rp_results);
      if (!in) throw std::runtime_error("cannot open " + rp_results);
      const auto files = jam::emit_report(rp_out, jam::read_results_csv(in));
      for (const auto& p : files.paths) spdlog::info("wrote {}", p);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
