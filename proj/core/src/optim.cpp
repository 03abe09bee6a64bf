#include "d3g/optim.hpp"

#include <cmath>

#include "d3g/errors.hpp"
#include "d3g/linalg.hpp"

namespace d3g {

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<double>> grads, AdamState& state,
               const AdamOptions& o) {
  if (params.size() != grads.size()) {
    throw ConfigError("adam_step: parameter and gradient block counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw ConfigError("adam_step: block " + std::to_string(b) + " shape mismatch");
    }
    if (!all_finite(grads[b])) {
      throw NumericalError("adam_step: non-finite gradient in block " +
                           std::to_string(b));
    }
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("adam_step: optimizer state does not mirror the parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    if (m.size() != params[b].size()) {
      throw ConfigError("adam_step: optimizer state does not mirror the parameters");
    }
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + o.epsilon);
      double& p = params[b][i];
      p -= o.learning_rate * (update + o.weight_decay * p);
    }
  }
}

}  // namespace d3g
