#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lvae/image.hpp"
#include "lvae/layers.hpp"
#include "lvae/tensor.hpp"

namespace lvae {

inline constexpr std::size_t kDefaultHiddenDim = 512;
inline constexpr std::size_t kDefaultLatentDim = 2;

// encode() saturates logvar into this range before it reaches exp().
inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

using Rng = std::mt19937_64;

// Parameters of the per-item diagonal Gaussian q(z|x).
struct LatentCode {
  Tensor mu;      // [batch, L]
  Tensor logvar;  // [batch, L]
};

// 784 -> H -> (mu, logvar) in R^L  |  R^L -> H -> 784
class VaeModel {
 public:
  // Layer order used by freezing and by the checkpoint format.
  enum LayerIndex : int {
    kEncHidden = 0,
    kEncMu = 1,
    kEncLogvar = 2,
    kDecHidden = 3,
    kDecOut = 4,
  };
  static constexpr int kLayerCount = 5;

  VaeModel() = default;

  // Glorot-initialised model drawn from `seed`.
  static VaeModel initialized(std::size_t hidden_dim, std::size_t latent_dim,
                              std::uint64_t seed);
  // All weights and biases zero.
  static VaeModel zeros(std::size_t hidden_dim, std::size_t latent_dim);

  bool empty() const { return hidden_dim_ == 0; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t parameter_count() const;

  LinearLayer& layer(int index) { return layers_.at(index); }
  const LinearLayer& layer(int index) const { return layers_.at(index); }
  std::array<LinearLayer, kLayerCount>& layers() { return layers_; }
  const std::array<LinearLayer, kLayerCount>& layers() const {
    return layers_;
  }

  LinearLayer& enc_hidden() { return layers_[kEncHidden]; }
  LinearLayer& enc_mu() { return layers_[kEncMu]; }
  LinearLayer& enc_logvar() { return layers_[kEncLogvar]; }
  LinearLayer& dec_hidden() { return layers_[kDecHidden]; }
  LinearLayer& dec_out() { return layers_[kDecOut]; }
  const LinearLayer& enc_hidden() const { return layers_[kEncHidden]; }
  const LinearLayer& enc_mu() const { return layers_[kEncMu]; }
  const LinearLayer& enc_logvar() const { return layers_[kEncLogvar]; }
  const LinearLayer& dec_hidden() const { return layers_[kDecHidden]; }
  const LinearLayer& dec_out() const { return layers_[kDecOut]; }

  // Freezes layers [0, last] and unfreezes the rest; nullopt unfreezes all.
  void freeze_up_to(std::optional<int> last);
  void zero_grads();

  // Parameters only; frozen flags and gradients are not compared.
  bool same_parameters(const VaeModel& other) const;

 private:
  VaeModel(std::size_t hidden_dim, std::size_t latent_dim);

  std::size_t hidden_dim_ = 0;
  std::size_t latent_dim_ = 0;
  std::array<LinearLayer, kLayerCount> layers_;
};

LatentCode encode(const VaeModel& model, const Tensor& x);

// z = mu + exp(logvar / 2) * eps with eps ~ N(0, 1) drawn from `rng`.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng);
Tensor reparameterize(const Tensor& mu, const Tensor& logvar,
                      const Tensor& eps);
Tensor standard_normal(std::vector<std::size_t> shape, Rng& rng);

Tensor decode(const VaeModel& model, const Tensor& z);

struct LossTerms {
  double total = 0.0;
  double bce = 0.0;
  double kl = 0.0;
};

// Negative ELBO, per-item sums averaged over the batch. x_hat is clamped to
// [1e-12, 1 - 1e-12] inside the logarithms so saturated outputs stay finite.
LossTerms loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu,
               const Tensor& logvar);

// KL(N(mu, exp(logvar)) || N(0, 1)) of a single diagonal Gaussian.
double kl_divergence(std::span<const double> mu,
                     std::span<const double> logvar);

// One training forward/backward pass with fixed noise `eps` [batch, L].
// Gradients of the total loss are accumulated into the unfrozen layers.
LossTerms forward_backward(VaeModel& model, const Tensor& x,
                           const Tensor& eps);

// Checkpoints: "LVAE", u16 version, u32 H, u32 L, then for each layer in
// LayerIndex order its weights and bias as little-endian f64, row-major.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_bytes(const VaeModel& model);
VaeModel model_from_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const VaeModel& model, const std::string& path);
VaeModel load_checkpoint(const std::string& path);

}  // namespace lvae
