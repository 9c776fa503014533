#include "jam/evaluate.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <map>

namespace jam {

std::vector<Prediction> predict_all(const Model& model, const std::vector<SceneSample>& scenes, int threads) {
  std::vector<Prediction> out(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), worker_threads(threads),
               [&](int i) { out[static_cast<std::size_t>(i)] = model.predict(scenes[static_cast<std::size_t>(i)]); });
  return out;
}

EvalResult evaluate_predictions(const std::vector<SceneSample>& scenes, const std::vector<Prediction>& predictions,
                                const ThresholdTable& thresholds, const std::string& name) {
  if (scenes.empty() || scenes.size() != predictions.size()) {
    throw std::invalid_argument("evaluate: scene and prediction counts differ or are zero");
  }
  std::vector<EvalItem> items;
  items.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) items.push_back(make_eval_item(scenes[i], predictions[i].joint));
  EvalResult res;
  res.rows = compute_metrics(items, thresholds, scenes.front().dims.sample_rate_hz, name);
  res.summary = pooled_summary(res.rows);
  return res;
}

EvalResult evaluate_model(const Model& model, const std::vector<SceneSample>& scenes, const ThresholdTable& thresholds,
                          const std::string& name, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto predictions = predict_all(model, scenes, threads);
  const auto t1 = std::chrono::steady_clock::now();
  EvalResult res = evaluate_predictions(scenes, predictions, thresholds, name);
  res.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(scenes.size());
  return res;
}

const VariantResult* ResultsTable::find(Variant v) const {
  for (const auto& r : variants) {
    if (r.variant == v) return &r;
  }
  return nullptr;
}

namespace {

MetricsRow average_rows(const std::vector<MetricsRow>& rows) {
  MetricsRow out = rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    out.min_ade += rows[i].min_ade;
    out.min_fde += rows[i].min_fde;
    out.miss_rate += rows[i].miss_rate;
    out.map += rows[i].map;
    out.soft_map += rows[i].soft_map;
  }
  const double n = static_cast<double>(rows.size());
  out.min_ade /= n;
  out.min_fde /= n;
  out.miss_rate /= n;
  out.map /= n;
  out.soft_map /= n;
  return out;
}

void finish_variant(VariantResult& vr) {
  std::vector<MetricsRow> trained;
  std::map<std::pair<std::string, std::string>, std::vector<MetricsRow>> keyed;
  std::vector<std::pair<std::string, std::string>> keys;
  double latency = 0.0;
  for (const auto& s : vr.seeds) {
    trained.push_back(s.trained);
    latency += s.latency_ms;
    for (const auto& r : s.rows) {
      const auto key = std::make_pair(r.agent_type, r.horizon);
      if (!keyed.count(key)) keys.push_back(key);
      keyed[key].push_back(r);
    }
  }
  vr.mean = average_rows(trained);
  vr.latency_ms = latency / static_cast<double>(vr.seeds.size());
  vr.rows.clear();
  for (const auto& k : keys) vr.rows.push_back(average_rows(keyed[k]));
}

}  // namespace

ResultsTable compare_frameworks(const std::vector<SceneSample>& train, const std::vector<SceneSample>& val,
                                const CompareOptions& options) {
  if (options.variants.empty() || options.seeds.empty()) throw std::invalid_argument("compare: no variants or seeds");
  if (val.empty()) throw std::invalid_argument("compare: empty validation set");
  ResultsTable table;
  auto note = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };
  for (const Variant v : options.variants) {
    VariantResult vr;
    vr.variant = v;
    const std::string name = to_string(v);
    try {
      const ModelConfig cfg = apply_variant(options.base, v);
      for (const auto seed : options.seeds) {
        Model model(cfg, seed);
        vr.parameters = model.parameters().scalar_count();
        SeedResult sr;
        sr.seed = seed;
        sr.initial = evaluate_model(model, val, options.thresholds, name, options.train.threads).summary;
        TrainOptions topt = options.train;
        topt.seed = seed;
        const TrainResult tr = train_model(model, train, options.anchors, topt);
        if (tr.aborted) throw std::runtime_error("training aborted: " + tr.abort_reason);
        sr.epochs = tr.epochs;
        const EvalResult er = evaluate_model(model, val, options.thresholds, name, options.train.threads);
        sr.trained = er.summary;
        sr.rows = er.rows;
        sr.latency_ms = er.latency_ms;
        if (vr.seeds.empty()) vr.example = model.predict(val.front()).joint;
        note(fmt::format("{} seed {}: minADE {:.4f} -> {:.4f}, miss rate {:.4f}", name, seed, sr.initial.min_ade,
                         sr.trained.min_ade, sr.trained.miss_rate));
        vr.seeds.push_back(std::move(sr));
      }
      finish_variant(vr);
      vr.complete = true;
      table.variants.push_back(std::move(vr));
    } catch (const std::exception& e) {
      vr.error = e.what();
      spdlog::error("compare: variant {} failed: {}", name, e.what());
      if (!vr.seeds.empty()) finish_variant(vr);
      table.variants.push_back(std::move(vr));
      table.complete = false;
      return table;
    }
  }
  table.complete = true;
  return table;
}

}  // namespace jam
