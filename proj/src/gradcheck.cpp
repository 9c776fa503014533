#include "jam/gradcheck.hpp"

#include "jam/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace jam {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

double evaluate(ParameterStore& store, const LossBuilder& build) {
  try {
    Graph g(&store);
    return build(g).scalar();
  } catch (const NonFiniteError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<Index> choose_entries(const Matrix& analytic, const GradCheckOptions& opt, Rng& rng) {
  const Index n = analytic.size();
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  if (opt.entries_per_param <= 0 || opt.entries_per_param >= n) return all;

  std::vector<Index> by_mag = all;
  std::stable_sort(by_mag.begin(), by_mag.end(), [&](Index a, Index b) {
    return std::abs(analytic.data()[a]) > std::abs(analytic.data()[b]);
  });
  std::vector<Index> chosen(by_mag.begin(), by_mag.begin() + std::min(opt.largest_first, opt.entries_per_param));
  while (static_cast<Index>(chosen.size()) < opt.entries_per_param) {
    const auto pick = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
    if (std::find(chosen.begin(), chosen.end(), pick) == chosen.end()) chosen.push_back(pick);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

GradReport check_gradients(ParameterStore& store, const LossBuilder& build, std::uint64_t seed,
                           const GradCheckOptions& options) {
  GradReport report;
  Gradients analytic = zero_gradients(store);
  try {
    Graph g(&store);
    const Var loss = build(g);
    g.backward(loss);
    g.accumulate(analytic);
  } catch (const NonFiniteError&) {
    report.finite = false;
    report.max_rel_error = std::numeric_limits<double>::infinity();
    return report;
  }

  Rng rng(seed);
  for (int p = 0; p < store.size(); ++p) {
    ParamGradCheck entry;
    entry.name = store[p].name;
    entry.entries = choose_entries(analytic[static_cast<std::size_t>(p)], options, rng);
    const auto m = static_cast<Index>(entry.entries.size());
    entry.analytic.resize(m);
    entry.numeric.resize(m);
    double* values = store[p].value.data();
    for (Index i = 0; i < m; ++i) {
      const Index flat = entry.entries[static_cast<std::size_t>(i)];
      const double saved = values[flat];
      values[flat] = saved + options.step;
      const double up = evaluate(store, build);
      values[flat] = saved - options.step;
      const double down = evaluate(store, build);
      values[flat] = saved;
      entry.analytic(i) = analytic[static_cast<std::size_t>(p)].data()[flat];
      entry.numeric(i) = (up - down) / (2.0 * options.step);
    }
    entry.finite = entry.analytic.allFinite() && entry.numeric.allFinite();
    if (entry.finite) {
      const double a = entry.analytic.norm();
      const double b = entry.numeric.norm();
      entry.rel_error = (entry.analytic - entry.numeric).norm() / std::max({a, b, 1e-8});
    } else {
      entry.rel_error = std::numeric_limits<double>::infinity();
      report.finite = false;
    }
    if (entry.rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.rel_error;
      report.worst_param = entry.name;
    }
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace jam
