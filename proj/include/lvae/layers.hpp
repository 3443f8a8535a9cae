#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "lvae/tensor.hpp"

namespace lvae {

// Fully connected layer with accumulating gradient buffers.
struct LinearLayer {
  Tensor weights;       // [out, in]
  Tensor bias;          // [out]
  Tensor grad_weights;  // [out, in]
  Tensor grad_bias;     // [out]
  bool frozen = false;

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out);

  // Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
  static LinearLayer glorot(std::size_t in, std::size_t out,
                            std::mt19937_64& rng);

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }

  void zero_grads();

  // Calls step(values, grads, slot) for the weights (slot 0) and the bias
  // (slot 1), then zeroes the gradients. Frozen layers skip the step.
  template <class Step>
  void apply_update(Step&& step) {
    if (!frozen) {
      step(weights.data(), std::span<const double>(grad_weights.data()), 0);
      step(bias.data(), std::span<const double>(grad_bias.data()), 1);
    }
    zero_grads();
  }
};

// out[b, o] = sum_i weights[o, i] * x[b, i] + bias[o]
Tensor linear_forward(const LinearLayer& layer, const Tensor& x);

// Accumulates grad_weights += grad_out^T x and grad_bias += colsum(grad_out)
// (unless the layer is frozen) and returns grad_in = grad_out * weights.
Tensor linear_backward(LinearLayer& layer, const Tensor& x,
                       const Tensor& grad_out);

enum class Activation { relu, sigmoid };

double sigmoid(double x);

Tensor activation_forward(Activation kind, const Tensor& x);

// `x` is the forward input. ReLU passes gradient only where x > 0.
Tensor activation_backward(Activation kind, const Tensor& x,
                           const Tensor& grad_out);

}  // namespace lvae
