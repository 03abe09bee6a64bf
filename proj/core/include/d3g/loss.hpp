#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace d3g {

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean squared difference over components.
LossGrad loss_mse(std::span<const double> pred, std::span<const double> target);

/// Softmax cross-entropy computed through log-sum-exp.
LossGrad loss_ce(std::span<const double> logits, std::size_t label);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> v);

}  // namespace d3g
