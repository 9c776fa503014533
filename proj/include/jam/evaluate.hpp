#pragma once

#include "jam/metrics.hpp"
#include "jam/model.hpp"
#include "jam/train.hpp"

#include <functional>
#include <string>
#include <vector>

namespace jam {

std::vector<Prediction> predict_all(const Model& model, const std::vector<SceneSample>& scenes, int threads = 0);

struct EvalResult {
  std::vector<MetricsRow> rows;
  MetricsRow summary;  // pooled, averaged over horizons
  double latency_ms = 0.0;  // mean wall time per scene, informational
};

EvalResult evaluate_predictions(const std::vector<SceneSample>& scenes, const std::vector<Prediction>& predictions,
                                const ThresholdTable& thresholds, const std::string& name);
EvalResult evaluate_model(const Model& model, const std::vector<SceneSample>& scenes, const ThresholdTable& thresholds,
                          const std::string& name, int threads = 0);

struct CompareOptions {
  ModelConfig base = ModelConfig::micro();
  TrainOptions train;
  std::vector<Variant> variants{Variant::MarginalFree, Variant::MarginalAware, Variant::JointOneStep, Variant::Jam};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  ThresholdTable thresholds;
  const AnchorSet* anchors = nullptr;
  std::function<void(const std::string&)> progress;
};

struct SeedResult {
  std::uint64_t seed = 0;
  MetricsRow initial;  // before training
  MetricsRow trained;
  std::vector<MetricsRow> rows;
  std::vector<EpochSummary> epochs;
  double latency_ms = 0.0;
};

struct VariantResult {
  Variant variant = Variant::Jam;
  Index parameters = 0;
  std::vector<SeedResult> seeds;
  MetricsRow mean;               // pooled summary averaged over seeds
  std::vector<MetricsRow> rows;  // per type and horizon, averaged over seeds
  double latency_ms = 0.0;
  JointPrediction example;       // first validation scene, first seed
  bool complete = false;
  std::string error;
};

struct ResultsTable {
  std::vector<VariantResult> variants;
  bool complete = false;

  const VariantResult* find(Variant v) const;
};

/// Trains and evaluates each variant on every seed. A failing variant stops
/// the comparison; the partial table is returned with complete = false.
ResultsTable compare_frameworks(const std::vector<SceneSample>& train, const std::vector<SceneSample>& val,
                                const CompareOptions& options);

}  // namespace jam
