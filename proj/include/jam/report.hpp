#pragma once

#include "jam/evaluate.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace jam {

class ReportError : public std::runtime_error {
 public:
  enum class Code { EmptyTable, Io, Format };
  ReportError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  Code code;
};

/// One line of the comparison summary: a seed's pooled metrics or, with
/// seed = "mean", the average over seeds.
struct ResultsRow {
  std::string variant;
  std::string seed;
  Index parameters = 0;
  double latency_ms = 0.0;
  double initial_min_ade = 0.0;
  MetricsRow metrics;

  bool operator==(const ResultsRow&) const = default;
};

inline constexpr const char* kResultsHeader =
    "variant,seed,parameters,latency_ms,initial_min_ade,scenes,min_ade,min_fde,miss_rate,map,soft_map";

std::vector<ResultsRow> results_rows(const ResultsTable& table);
void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows);
std::vector<ResultsRow> read_results_csv(std::istream& in);

/// Per-variant (type, horizon) rows, model column set to the variant name.
/// Throws ReportError on duplicate (variant, type, horizon) keys.
std::vector<MetricsRow> table_metrics(const ResultsTable& table);

/// Horizontal bar chart of one summary metric per variant ("mean" rows).
std::string bar_chart_svg(const std::vector<ResultsRow>& rows, const std::string& metric);

struct OverlayPanel {
  std::string label;
  JointPrediction prediction;
};

/// Ground truth, history and map of a scene's interacting pair with each
/// panel's joint modes drawn on top; line opacity follows mode score.
std::string trajectory_overlay_svg(const SceneSample& scene, const std::vector<OverlayPanel>& panels);

struct ReportFiles {
  std::vector<std::string> paths;
};

/// Writes results.csv, metrics.csv, min_ade.svg, miss_rate.svg and, when a
/// scene is given and the table carries example predictions,
/// trajectories.svg into `dir`.
ReportFiles emit_report(const std::string& dir, const ResultsTable& table, const SceneSample* example_scene = nullptr);

/// Rebuilds the bar charts from an existing results.csv.
ReportFiles emit_report(const std::string& dir, const std::vector<ResultsRow>& rows);

}  // namespace jam
