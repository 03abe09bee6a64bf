#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace d3g {

struct AdamOptions {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment buffers mirroring a list of parameter blocks.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

/// Adam with decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
/// State buffers are created on the first call. Throws NumericalError on a
/// non-finite gradient (parameters are left untouched in that case) and
/// ConfigError on a shape mismatch.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<double>> grads, AdamState& state,
               const AdamOptions& options);

}  // namespace d3g
