#include "d3g/mlp.hpp"

#include <cmath>
#include <string>

#include "d3g/errors.hpp"
#include "d3g/linalg.hpp"
#include "d3g/rng.hpp"

namespace d3g {
namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::kIdentity:
      return v;
    case Activation::kRelu:
      return v > 0.0 ? v : 0.0;
    case Activation::kTanh:
      return std::tanh(v);
  }
  return v;
}

// Derivative expressed through the activation output y.
double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - y * y;
  }
  return 1.0;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : in_dim(in), out_dim(out), activation(act), weight(in * out, 0.0), bias(out, 0.0) {}

std::size_t DenseParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim;
}

std::size_t DenseParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim;
}

std::size_t DenseParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void DenseParams::validate() const {
  if (layers.empty()) throw ConfigError("dense network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.in_dim == 0 || l.out_dim == 0) {
      throw ConfigError("layer " + std::to_string(k) + " has a zero dimension");
    }
    if (l.weight.size() != l.in_dim * l.out_dim || l.bias.size() != l.out_dim) {
      throw ConfigError("layer " + std::to_string(k) + " buffers do not match its shape");
    }
    if (k + 1 < layers.size() && l.out_dim != layers[k + 1].in_dim) {
      throw ConfigError("layer " + std::to_string(k) + " output width " +
                        std::to_string(l.out_dim) + " does not match layer " +
                        std::to_string(k + 1) + " input width " +
                        std::to_string(layers[k + 1].in_dim));
    }
    if (!all_finite(l.weight) || !all_finite(l.bias)) {
      throw ConfigError("layer " + std::to_string(k) + " has non-finite entries");
    }
  }
}

DenseParams DenseParams::zeros_like() const {
  DenseParams z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) z.layers.emplace_back(l.in_dim, l.out_dim, l.activation);
  return z;
}

void DenseParams::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

std::vector<std::span<double>> DenseParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> DenseParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

DenseParams make_dense(std::span<const std::size_t> dims,
                       std::span<const Activation> acts, Rng& rng) {
  if (dims.size() != acts.size() + 1 || acts.empty()) {
    throw ConfigError("make_dense needs one more width than activations");
  }
  DenseParams p;
  for (std::size_t k = 0; k < acts.size(); ++k) {
    DenseLayer layer(dims[k], dims[k + 1], acts[k]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
    for (double& w : layer.weight) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

std::vector<double> forward(const DenseParams& params, std::span<const double> x,
                            Tape* tape) {
  if (params.layers.empty()) throw ConfigError("forward through an empty network");
  if (x.size() != params.input_dim()) {
    throw ConfigError("input has " + std::to_string(x.size()) +
                      " entries, network expects " +
                      std::to_string(params.input_dim()));
  }
  if (tape) {
    tape->inputs.resize(params.layers.size());
    tape->outputs.resize(params.layers.size());
  }
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& l = params.layers[k];
    std::vector<double> out(l.out_dim);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double* row = l.weight.data() + o * l.in_dim;
      double s = l.bias[o];
      for (std::size_t i = 0; i < l.in_dim; ++i) s += row[i] * cur[i];
      out[o] = activate(l.activation, s);
    }
    if (tape) {
      tape->inputs[k] = std::move(cur);
      tape->outputs[k] = out;
    }
    cur = std::move(out);
  }
  return cur;
}

std::vector<double> backward(const DenseParams& params, const Tape& tape,
                             std::span<const double> grad_output,
                             DenseParams& grads) {
  const std::size_t n = params.layers.size();
  if (tape.inputs.size() != n || tape.outputs.size() != n ||
      grads.layers.size() != n) {
    throw ConfigError("tape or gradient buffer does not match the network");
  }
  if (grad_output.size() != params.output_dim()) {
    throw ConfigError("grad_output has the wrong length");
  }
  std::vector<double> upstream(grad_output.begin(), grad_output.end());
  for (std::size_t k = n; k-- > 0;) {
    const auto& l = params.layers[k];
    auto& g = grads.layers[k];
    const auto& in = tape.inputs[k];
    const auto& out = tape.outputs[k];
    if (in.size() != l.in_dim || out.size() != l.out_dim ||
        g.weight.size() != l.weight.size()) {
      throw ConfigError("stale tape: cached shapes differ from layer " +
                        std::to_string(k));
    }
    std::vector<double> delta(l.out_dim);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      delta[o] = upstream[o] * activation_slope(l.activation, out[o]);
    }
    std::vector<double> down(l.in_dim, 0.0);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      g.bias[o] += d;
      const double* row = l.weight.data() + o * l.in_dim;
      double* grow = g.weight.data() + o * l.in_dim;
      for (std::size_t i = 0; i < l.in_dim; ++i) {
        grow[i] += d * in[i];
        down[i] += d * row[i];
      }
    }
    upstream = std::move(down);
  }
  return upstream;
}

BackwardResult backward(const DenseParams& params, const Tape& tape,
                        std::span<const double> grad_output) {
  BackwardResult r{params.zeros_like(), {}};
  r.grad_input = backward(params, tape, grad_output, r.grad_params);
  return r;
}

}  // namespace d3g
