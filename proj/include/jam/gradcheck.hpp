#pragma once

#include "jam/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace jam {

struct GradCheckOptions {
  double step = 1e-5;
  /// Entries probed per parameter. 0 probes every entry. Otherwise the
  /// largest-magnitude analytic entries are probed first, then random ones.
  Index entries_per_param = 0;
  Index largest_first = 2;
};

struct ParamGradCheck {
  std::string name;
  std::vector<Index> entries;  // flat row-major indices probed
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
  double rel_error = 0.0;  // |a - b| / max(|a|, |b|, 1e-8), norms over probed entries
  bool finite = true;
};

struct GradReport {
  std::vector<ParamGradCheck> params;
  double max_rel_error = 0.0;
  std::string worst_param;
  bool finite = true;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

using LossBuilder = std::function<Var(Graph&)>;

/// Compares reverse-mode gradients of a scalar loss with central finite
/// differences. Parameters in `store` are perturbed in place and restored.
/// Non-finite values are reported, not thrown.
GradReport check_gradients(ParameterStore& store, const LossBuilder& build, std::uint64_t seed,
                           const GradCheckOptions& options = {});

}  // namespace jam
