#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace d3g {

class Rng;

enum class Activation { kIdentity, kRelu, kTanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Fully connected layer: out = act(W in + b), W stored row-major out x in.
struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::kIdentity;
  std::vector<double> weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act);

  double& w(std::size_t o, std::size_t i) { return weight[o * in_dim + i]; }
  double w(std::size_t o, std::size_t i) const { return weight[o * in_dim + i]; }

  bool operator==(const DenseLayer&) const = default;
};

/// A chain of dense layers. Consecutive dimensions must agree.
struct DenseParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  /// Throws ConfigError if dimensions do not chain or an entry is not finite.
  void validate() const;
  /// Same shapes, all zeros.
  DenseParams zeros_like() const;
  void set_zero();

  /// Weight and bias buffers of every layer, in order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  bool operator==(const DenseParams&) const = default;
};

/// Build a chain with the given widths; dims has one more entry than acts.
/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
DenseParams make_dense(std::span<const std::size_t> dims,
                       std::span<const Activation> acts, Rng& rng);

/// Activations cached by forward(). inputs[k] is the input of layer k,
/// outputs[k] its post-activation output.
struct Tape {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;

  std::span<const double> output() const { return outputs.back(); }
};

std::vector<double> forward(const DenseParams& params, std::span<const double> x,
                            Tape* tape = nullptr);

/// Accumulates d(output . grad_output)/d(params) into grads and returns the
/// gradient with respect to the network input.
std::vector<double> backward(const DenseParams& params, const Tape& tape,
                             std::span<const double> grad_output,
                             DenseParams& grads);

struct BackwardResult {
  DenseParams grad_params;
  std::vector<double> grad_input;
};

BackwardResult backward(const DenseParams& params, const Tape& tape,
                        std::span<const double> grad_output);

}  // namespace d3g
