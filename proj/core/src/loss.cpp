#include "d3g/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "d3g/errors.hpp"

namespace d3g {

LossGrad loss_mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ConfigError("loss_mse: prediction has " + std::to_string(pred.size()) +
                      " entries, target has " + std::to_string(target.size()));
  }
  const double n = static_cast<double>(pred.size());
  LossGrad r{0.0, std::vector<double>(pred.size())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    r.loss += diff * diff;
    r.grad[i] = 2.0 * diff / n;
  }
  r.loss /= n;
  return r;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& x : p) x /= s;
  return p;
}

LossGrad loss_ce(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ConfigError("loss_ce: label " + std::to_string(label) +
                      " out of range for " + std::to_string(logits.size()) +
                      " classes");
  }
  LossGrad r;
  r.loss = log_sum_exp(logits) - logits[label];
  r.grad = softmax(logits);
  r.grad[label] -= 1.0;
  return r;
}

}  // namespace d3g
