#include "jam/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

namespace jam {

namespace fs = std::filesystem;

namespace {

ResultsRow make_row(const VariantResult& v, const std::string& seed, double initial, const MetricsRow& m, double latency) {
  ResultsRow r;
  r.variant = to_string(v.variant);
  r.seed = seed;
  r.parameters = v.parameters;
  r.latency_ms = latency;
  r.initial_min_ade = initial;
  r.metrics = m;
  r.metrics.model = r.variant;
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError(ReportError::Code::Io, "report: cannot open " + path.string());
  out << text;
  if (!out) throw ReportError(ReportError::Code::Io, "report: write failed for " + path.string());
}

double metric_value(const MetricsRow& m, const std::string& metric) {
  if (metric == "min_ade") return m.min_ade;
  if (metric == "min_fde") return m.min_fde;
  if (metric == "miss_rate") return m.miss_rate;
  if (metric == "map") return m.map;
  if (metric == "soft_map") return m.soft_map;
  throw ReportError(ReportError::Code::Format, "report: unknown metric '" + metric + "'");
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<ResultsRow> results_rows(const ResultsTable& table) {
  if (table.variants.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: results table has no variants");
  std::vector<ResultsRow> rows;
  for (const auto& v : table.variants) {
    double initial = 0.0;
    for (const auto& s : v.seeds) {
      rows.push_back(make_row(v, std::to_string(s.seed), s.initial.min_ade, s.trained, s.latency_ms));
      initial += s.initial.min_ade;
    }
    if (v.complete && !v.seeds.empty()) {
      rows.push_back(make_row(v, "mean", initial / static_cast<double>(v.seeds.size()), v.mean, v.latency_ms));
    }
  }
  if (rows.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: results table has no evaluated seeds");
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows) {
  if (rows.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: no result rows");
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.variant, r.seed, r.parameters, r.latency_ms,
                       r.initial_min_ade, m.scenes, m.min_ade, m.min_fde, m.miss_rate, m.map, m.soft_map);
  }
}

std::vector<ResultsRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw ReportError(ReportError::Code::Format, "results csv: missing or unexpected header");
  }
  std::vector<ResultsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw ReportError(ReportError::Code::Format, "results csv: expected 11 fields in '" + line + "'");
    try {
      ResultsRow r;
      r.variant = f[0];
      r.seed = f[1];
      r.parameters = std::stoll(f[2]);
      r.latency_ms = std::stod(f[3]);
      r.initial_min_ade = std::stod(f[4]);
      r.metrics.model = f[0];
      r.metrics.agent_type = "all";
      r.metrics.horizon = "avg";
      r.metrics.scenes = std::stoi(f[5]);
      r.metrics.min_ade = std::stod(f[6]);
      r.metrics.min_fde = std::stod(f[7]);
      r.metrics.miss_rate = std::stod(f[8]);
      r.metrics.map = std::stod(f[9]);
      r.metrics.soft_map = std::stod(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ReportError(ReportError::Code::Format, "results csv: bad number in '" + line + "'");
    }
  }
  if (rows.empty()) throw ReportError(ReportError::Code::EmptyTable, "results csv: no rows");
  return rows;
}

std::vector<MetricsRow> table_metrics(const ResultsTable& table) {
  std::vector<MetricsRow> out;
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  for (const auto& v : table.variants) {
    for (auto r : v.rows) {
      r.model = to_string(v.variant);
      if (!keys.emplace(r.model, r.agent_type, r.horizon).second) {
        throw ReportError(ReportError::Code::Format,
                          fmt::format("report: duplicate row {}/{}/{}", r.model, r.agent_type, r.horizon));
      }
      out.push_back(std::move(r));
    }
  }
  if (out.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: no metric rows");
  return out;
}

std::string bar_chart_svg(const std::vector<ResultsRow>& rows, const std::string& metric) {
  std::vector<const ResultsRow*> bars;
  for (const auto& r : rows) {
    if (r.seed == "mean") bars.push_back(&r);
  }
  if (bars.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: no mean rows to plot");
  double top = 0.0;
  for (const auto* r : bars) top = std::max(top, metric_value(r->metrics, metric));
  if (!(top > 0.0)) top = 1.0;

  const int label_w = 140, plot_w = 360, bar_h = 22, gap = 10, margin = 20;
  const int width = label_w + plot_w + 2 * margin + 60;
  const int height = margin * 2 + 24 + static_cast<int>(bars.size()) * (bar_h + gap);
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height, width, height);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\">{} by variant</text>\n", margin, margin + 4, metric);
  int y = margin + 24;
  for (const auto* r : bars) {
    const double v = metric_value(r->metrics, metric);
    const double w = plot_w * std::clamp(v / top, 0.0, 1.0);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", margin, y + bar_h - 6, escape(r->variant));
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"#4878a8\"/>\n", margin + label_w,
                       y, w, bar_h);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{}\">{:.4f}</text>\n", margin + label_w + w + 4, y + bar_h - 6, v);
    y += bar_h + gap;
  }
  svg += "</svg>\n";
  return svg;
}

std::string trajectory_overlay_svg(const SceneSample& scene, const std::vector<OverlayPanel>& panels) {
  if (panels.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: no overlay panels");
  const auto& d = scene.dims;

  // Bounds over the pair's history, ground truth, map and all predicted means.
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  auto grow = [&](double x, double y) {
    x0 = std::min(x0, x), x1 = std::max(x1, x);
    y0 = std::min(y0, y), y1 = std::max(y1, y);
  };
  for (const int a : scene.interacting) {
    for (int t = 0; t < d.history; ++t) {
      if (scene.step_valid(a, t)) grow(scene.histories(scene.history_row(a, t), 0), scene.histories(scene.history_row(a, t), 1));
    }
    for (int t = 0; t < d.future; ++t) grow(scene.futures(scene.future_row(a, t), 0), scene.futures(scene.future_row(a, t), 1));
  }
  for (const auto& p : panels) {
    for (const auto& m : p.prediction.modes) {
      for (const auto& s : m.steps) {
        for (Index t = 0; t < s.rows(); ++t) {
          if (std::isfinite(s(t, 0)) && std::isfinite(s(t, 1))) grow(s(t, 0), s(t, 1));
        }
      }
    }
  }
  const double pad = 5.0;
  x0 -= pad, y0 -= pad, x1 += pad, y1 += pad;
  const double extent = std::max(x1 - x0, y1 - y0);
  const int size = 360, margin = 20, title = 20;
  const double scale = size / extent;
  auto px = [&](double x) { return (x - x0) * scale; };
  auto py = [&](double y) { return size - (y - y0) * scale; };
  auto polyline = [&](const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    if (pts.size() < 2) return std::string();
    std::string s = "<polyline fill=\"none\" " + style + " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      s += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", px(pts[i].first), py(pts[i].second));
    }
    return s + "\"/>\n";
  };

  std::string common;
  for (const int a : scene.interacting) {
    for (int e = 0; e < d.map_elements; ++e) {
      std::vector<std::pair<double, double>> pts;
      for (int p = 0; p < d.map_points; ++p) {
        const Index r = scene.map_row(a, e, p);
        if (scene.map(r, 4) <= 0.0) continue;
        const double x = scene.map(r, 0), y = scene.map(r, 1);
        if (x < x0 || x > x0 + extent || y < y0 || y > y0 + extent) continue;
        pts.emplace_back(x, y);
      }
      common += polyline(pts, "stroke=\"#c8c8c8\" stroke-width=\"1\"");
    }
  }
  for (const int a : scene.interacting) {
    std::vector<std::pair<double, double>> hist, gt;
    for (int t = 0; t < d.history; ++t) {
      if (!scene.step_valid(a, t)) continue;
      hist.emplace_back(scene.histories(scene.history_row(a, t), 0), scene.histories(scene.history_row(a, t), 1));
    }
    gt = hist.empty() ? gt : std::vector<std::pair<double, double>>{hist.back()};
    for (int t = 0; t < d.future; ++t) gt.emplace_back(scene.futures(scene.future_row(a, t), 0), scene.futures(scene.future_row(a, t), 1));
    common += polyline(hist, "stroke=\"black\" stroke-width=\"2\"");
    common += polyline(gt, "stroke=\"#2e8b57\" stroke-width=\"2\" stroke-dasharray=\"4 2\"");
  }

  const int width = static_cast<int>(panels.size()) * (size + margin) + margin;
  const int height = size + 2 * margin + title;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height, width, height);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
  const char* colors[2] = {"#1f5fbf", "#c0392b"};
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int ox = margin + static_cast<int>(i) * (size + margin);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\">{}</text>\n", ox, margin + 4, escape(panels[i].label));
    svg += fmt::format("<g transform=\"translate({},{})\">\n", ox, margin + title);
    svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n", size, size);
    svg += common;
    double best = 0.0;
    for (const auto& m : panels[i].prediction.modes) best = std::max(best, m.score);
    for (const auto& m : panels[i].prediction.modes) {
      const double opacity = best > 0.0 ? 0.2 + 0.8 * m.score / best : 1.0;
      for (int a = 0; a < 2; ++a) {
        std::vector<std::pair<double, double>> pts;
        for (Index t = 0; t < m.steps[static_cast<std::size_t>(a)].rows(); ++t) {
          pts.emplace_back(m.steps[static_cast<std::size_t>(a)](t, 0), m.steps[static_cast<std::size_t>(a)](t, 1));
        }
        svg += polyline(pts, fmt::format("stroke=\"{}\" stroke-width=\"1.5\" stroke-opacity=\"{:.3f}\"", colors[a], opacity));
      }
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

ReportFiles write_charts(const fs::path& dir, const std::vector<ResultsRow>& rows, ReportFiles files) {
  for (const char* metric : {"min_ade", "miss_rate"}) {
    const auto path = dir / (std::string(metric) + ".svg");
    write_text(path, bar_chart_svg(rows, metric));
    files.paths.push_back(path.string());
  }
  return files;
}

void prepare(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ReportError(ReportError::Code::Io, "report: cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

ReportFiles emit_report(const std::string& dir, const ResultsTable& table, const SceneSample* example_scene) {
  const auto rows = results_rows(table);
  const auto metrics = table_metrics(table);
  const fs::path root(dir);
  prepare(root);
  ReportFiles files;
  {
    std::ostringstream out;
    write_results_csv(out, rows);
    write_text(root / "results.csv", out.str());
    files.paths.push_back((root / "results.csv").string());
  }
  {
    std::ostringstream out;
    write_metrics_csv(out, metrics);
    write_text(root / "metrics.csv", out.str());
    files.paths.push_back((root / "metrics.csv").string());
  }
  files = write_charts(root, rows, std::move(files));
  if (example_scene) {
    std::vector<OverlayPanel> panels;
    for (const auto& v : table.variants) {
      if (!v.example.modes.empty()) panels.push_back({to_string(v.variant), v.example});
    }
    if (!panels.empty()) {
      write_text(root / "trajectories.svg", trajectory_overlay_svg(*example_scene, panels));
      files.paths.push_back((root / "trajectories.svg").string());
    }
  }
  return files;
}

ReportFiles emit_report(const std::string& dir, const std::vector<ResultsRow>& rows) {
  if (rows.empty()) throw ReportError(ReportError::Code::EmptyTable, "report: no result rows");
  const fs::path root(dir);
  prepare(root);
  return write_charts(root, rows, {});
}

}  // namespace jam
