#include "d3g/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "d3g/errors.hpp"

namespace d3g {

GradCheckResult grad_check(const std::function<double()>& fn,
                           std::span<const std::span<double>> params,
                           std::span<const std::span<double>> analytic,
                           const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ConfigError("grad_check: parameter and gradient block counts differ");
  }
  GradCheckResult r;
  std::size_t flat = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != analytic[b].size()) {
      throw ConfigError("grad_check: block shape mismatch");
    }
    for (std::size_t i = 0; i < params[b].size(); ++i, ++flat) {
      double& p = params[b][i];
      const double saved = p;
      p = saved + options.step;
      const double up = fn();
      p = saved - options.step;
      const double down = fn();
      p = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[b][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double err = std::abs(a - numeric) / denom;
      if (err > r.max_relative_error || flat == 0) {
        r.max_relative_error = std::max(r.max_relative_error, err);
        r.worst_index = flat;
        r.analytic_at_worst = a;
        r.numeric_at_worst = numeric;
      }
    }
  }
  r.coordinates = flat;
  return r;
}

}  // namespace d3g
