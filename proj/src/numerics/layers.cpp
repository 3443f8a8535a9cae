#include "lvae/layers.hpp"

#include <cmath>

#include "lvae/errors.hpp"

namespace lvae {

namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2)
    throw DimensionError(std::string(what) + " must be a matrix, got shape " +
                         t.shape_string());
}

}  // namespace

LinearLayer::LinearLayer(std::size_t in, std::size_t out)
    : weights({out, in}),
      bias({out}),
      grad_weights({out, in}),
      grad_bias({out}) {}

LinearLayer LinearLayer::glorot(std::size_t in, std::size_t out,
                                std::mt19937_64& rng) {
  LinearLayer layer(in, out);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& w : layer.weights.data()) w = dist(rng);
  return layer;
}

void LinearLayer::zero_grads() {
  grad_weights.fill(0.0);
  grad_bias.fill(0.0);
}

Tensor linear_forward(const LinearLayer& layer, const Tensor& x) {
  require_matrix(x, "linear input");
  if (x.cols() != layer.in_dim())
    throw DimensionError("linear_forward: input shape " + x.shape_string() +
                         " incompatible with weights " +
                         layer.weights.shape_string());
  const std::size_t batch = x.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  Tensor y({batch, out});
  const double* w = layer.weights.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.row(b).data();
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xb[i];
      y(b, o) = acc + layer.bias[o];
    }
  }
  return y;
}

Tensor linear_backward(LinearLayer& layer, const Tensor& x,
                       const Tensor& grad_out) {
  require_matrix(x, "linear input");
  require_matrix(grad_out, "upstream gradient");
  if (x.cols() != layer.in_dim() || grad_out.cols() != layer.out_dim() ||
      grad_out.rows() != x.rows())
    throw DimensionError("linear_backward: input " + x.shape_string() +
                         " and gradient " + grad_out.shape_string() +
                         " incompatible with weights " +
                         layer.weights.shape_string());
  const std::size_t batch = x.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();

  Tensor grad_in({batch, in});
  const double* w = layer.weights.data().data();
  double* gw = layer.grad_weights.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.row(b).data();
    double* gi = grad_in.row(b).data();
    for (std::size_t o = 0; o < out; ++o) {
      const double g = grad_out(b, o);
      if (g == 0.0) continue;
      const double* wo = w + o * in;
      for (std::size_t i = 0; i < in; ++i) gi[i] += g * wo[i];
      if (!layer.frozen) {
        double* gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwo[i] += g * xb[i];
        layer.grad_bias[o] += g;
      }
    }
  }
  return grad_in;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor activation_forward(Activation kind, const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) {
    switch (kind) {
      case Activation::relu:
        v = v > 0.0 ? v : 0.0;
        break;
      case Activation::sigmoid:
        v = sigmoid(v);
        break;
    }
  }
  return y;
}

Tensor activation_backward(Activation kind, const Tensor& x,
                           const Tensor& grad_out) {
  if (x.shape() != grad_out.shape())
    throw DimensionError("activation_backward: input " + x.shape_string() +
                         " vs gradient " + grad_out.shape_string());
  Tensor g = grad_out;
  auto xs = x.data();
  auto gs = g.data();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    switch (kind) {
      case Activation::relu:
        if (!(xs[i] > 0.0)) gs[i] = 0.0;
        break;
      case Activation::sigmoid: {
        const double s = sigmoid(xs[i]);
        gs[i] *= s * (1.0 - s);
        break;
      }
    }
  }
  return g;
}

}  // namespace lvae
