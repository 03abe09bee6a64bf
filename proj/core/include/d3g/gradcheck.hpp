#pragma once

#include <functional>
#include <span>
#include <vector>

namespace d3g {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coordinates = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-4;
};

/// Compares analytic gradients against central differences over every
/// coordinate of params. fn is evaluated with params perturbed in place and
/// restored afterwards.
GradCheckResult grad_check(const std::function<double()>& fn,
                           std::span<const std::span<double>> params,
                           std::span<const std::span<double>> analytic,
                           const GradCheckOptions& options = {});

}  // namespace d3g
