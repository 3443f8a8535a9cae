#include "lvae/vae.hpp"

#include <algorithm>
#include <cmath>

#include "lvae/errors.hpp"

namespace lvae {

namespace {

constexpr double kProbFloor = 1e-12;

void require_model(const VaeModel& model) {
  if (model.empty()) throw ModelError("model is not initialised");
}

void require_width(const Tensor& t, std::size_t width, const char* what) {
  if (t.rank() != 2 || t.cols() != width)
    throw DimensionError(std::string(what) + ": expected shape [batch, " +
                         std::to_string(width) + "], got " + t.shape_string());
}

double clamp_logvar(double v) { return std::clamp(v, kLogvarMin, kLogvarMax); }

}  // namespace

VaeModel::VaeModel(std::size_t hidden_dim, std::size_t latent_dim)
    : hidden_dim_(hidden_dim), latent_dim_(latent_dim) {
  if (hidden_dim == 0 || latent_dim == 0)
    throw ConfigError("hidden and latent dimensions must be positive");
}

VaeModel VaeModel::initialized(std::size_t hidden_dim, std::size_t latent_dim,
                               std::uint64_t seed) {
  VaeModel m(hidden_dim, latent_dim);
  Rng rng(seed);
  m.layers_[kEncHidden] = LinearLayer::glorot(kImagePixels, hidden_dim, rng);
  m.layers_[kEncMu] = LinearLayer::glorot(hidden_dim, latent_dim, rng);
  m.layers_[kEncLogvar] = LinearLayer::glorot(hidden_dim, latent_dim, rng);
  m.layers_[kDecHidden] = LinearLayer::glorot(latent_dim, hidden_dim, rng);
  m.layers_[kDecOut] = LinearLayer::glorot(hidden_dim, kImagePixels, rng);
  return m;
}

VaeModel VaeModel::zeros(std::size_t hidden_dim, std::size_t latent_dim) {
  VaeModel m(hidden_dim, latent_dim);
  m.layers_[kEncHidden] = LinearLayer(kImagePixels, hidden_dim);
  m.layers_[kEncMu] = LinearLayer(hidden_dim, latent_dim);
  m.layers_[kEncLogvar] = LinearLayer(hidden_dim, latent_dim);
  m.layers_[kDecHidden] = LinearLayer(latent_dim, hidden_dim);
  m.layers_[kDecOut] = LinearLayer(hidden_dim, kImagePixels);
  return m;
}

std::size_t VaeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    if (!l.weights.empty()) n += l.parameter_count();
  return n;
}

void VaeModel::freeze_up_to(std::optional<int> last) {
  if (last && (*last < 0 || *last >= kLayerCount))
    throw ConfigError("freeze_up_to must be in [0, " +
                      std::to_string(kLayerCount - 1) + "]");
  for (int i = 0; i < kLayerCount; ++i)
    layers_[i].frozen = last.has_value() && i <= *last;
}

void VaeModel::zero_grads() {
  for (auto& l : layers_) l.zero_grads();
}

bool VaeModel::same_parameters(const VaeModel& other) const {
  if (hidden_dim_ != other.hidden_dim_ || latent_dim_ != other.latent_dim_)
    return false;
  for (int i = 0; i < kLayerCount; ++i) {
    if (!(layers_[i].weights == other.layers_[i].weights) ||
        !(layers_[i].bias == other.layers_[i].bias))
      return false;
  }
  return true;
}

LatentCode encode(const VaeModel& model, const Tensor& x) {
  require_model(model);
  require_width(x, kImagePixels, "encode");
  const Tensor h = activation_forward(
      Activation::relu, linear_forward(model.enc_hidden(), x));
  LatentCode code{linear_forward(model.enc_mu(), h),
                  linear_forward(model.enc_logvar(), h)};
  for (auto& v : code.logvar.data()) v = clamp_logvar(v);
  return code;
}

Tensor standard_normal(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar,
                      const Tensor& eps) {
  if (mu.shape() != logvar.shape() || mu.shape() != eps.shape())
    throw DimensionError("reparameterize: mu " + mu.shape_string() +
                         ", logvar " + logvar.shape_string() + ", eps " +
                         eps.shape_string());
  Tensor z = mu;
  auto zs = z.data();
  for (std::size_t i = 0; i < zs.size(); ++i)
    zs[i] += std::exp(0.5 * logvar[i]) * eps[i];
  return z;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng) {
  if (mu.shape() != logvar.shape())
    throw DimensionError("reparameterize: mu " + mu.shape_string() +
                         " vs logvar " + logvar.shape_string());
  return reparameterize(mu, logvar, standard_normal(mu.shape(), rng));
}

Tensor decode(const VaeModel& model, const Tensor& z) {
  require_model(model);
  require_width(z, model.latent_dim(), "decode");
  const Tensor h = activation_forward(
      Activation::relu, linear_forward(model.dec_hidden(), z));
  return activation_forward(Activation::sigmoid,
                            linear_forward(model.dec_out(), h));
}

double kl_divergence(std::span<const double> mu,
                     std::span<const double> logvar) {
  double s = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j)
    s += 1.0 + logvar[j] - mu[j] * mu[j] - std::exp(logvar[j]);
  return -0.5 * s;
}

LossTerms loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu,
               const Tensor& logvar) {
  if (x.shape() != x_hat.shape() || mu.shape() != logvar.shape() ||
      x.rank() != 2 || mu.rank() != 2 || x.rows() != mu.rows())
    throw DimensionError("loss: x " + x.shape_string() + ", x_hat " +
                         x_hat.shape_string() + ", mu " + mu.shape_string() +
                         ", logvar " + logvar.shape_string());
  const std::size_t batch = x.rows();
  LossTerms t;
  for (std::size_t b = 0; b < batch; ++b) {
    auto xs = x.row(b);
    auto ps = x_hat.row(b);
    double bce = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double p = std::clamp(ps[i], kProbFloor, 1.0 - kProbFloor);
      bce -= xs[i] * std::log(p) + (1.0 - xs[i]) * std::log(1.0 - p);
    }
    t.bce += bce;
    t.kl += kl_divergence(mu.row(b), logvar.row(b));
  }
  t.bce /= static_cast<double>(batch);
  t.kl /= static_cast<double>(batch);
  t.total = t.bce + t.kl;
  return t;
}

LossTerms forward_backward(VaeModel& model, const Tensor& x,
                           const Tensor& eps) {
  require_model(model);
  require_width(x, kImagePixels, "forward_backward");
  const std::size_t batch = x.rows();
  const std::size_t latent = model.latent_dim();
  require_width(eps, latent, "forward_backward noise");
  if (eps.rows() != batch)
    throw DimensionError("forward_backward: noise " + eps.shape_string() +
                         " vs batch " + x.shape_string());

  // Forward.
  const Tensor enc_pre = linear_forward(model.enc_hidden(), x);
  const Tensor enc_act = activation_forward(Activation::relu, enc_pre);
  const Tensor mu = linear_forward(model.enc_mu(), enc_act);
  const Tensor logvar_raw = linear_forward(model.enc_logvar(), enc_act);
  Tensor logvar = logvar_raw;
  for (auto& v : logvar.data()) v = clamp_logvar(v);
  const Tensor z = reparameterize(mu, logvar, eps);
  const Tensor dec_pre = linear_forward(model.dec_hidden(), z);
  const Tensor dec_act = activation_forward(Activation::relu, dec_pre);
  const Tensor logits = linear_forward(model.dec_out(), dec_act);
  const Tensor x_hat = activation_forward(Activation::sigmoid, logits);
  const LossTerms terms = loss(x, x_hat, mu, logvar);

  // Backward. The sigmoid + Bernoulli pair collapses to (x_hat - x).
  const double inv_batch = 1.0 / static_cast<double>(batch);
  Tensor grad_logits = x_hat;
  for (std::size_t i = 0; i < grad_logits.size(); ++i)
    grad_logits[i] = (x_hat[i] - x[i]) * inv_batch;

  Tensor grad_dec_act = linear_backward(model.dec_out(), dec_act, grad_logits);
  Tensor grad_dec_pre =
      activation_backward(Activation::relu, dec_pre, grad_dec_act);
  Tensor grad_z = linear_backward(model.dec_hidden(), z, grad_dec_pre);

  Tensor grad_mu({batch, latent});
  Tensor grad_logvar({batch, latent});
  for (std::size_t i = 0; i < grad_mu.size(); ++i) {
    const double var = std::exp(logvar[i]);
    const double sd = std::exp(0.5 * logvar[i]);
    grad_mu[i] = grad_z[i] + mu[i] * inv_batch;
    const double through_sample = grad_z[i] * eps[i] * 0.5 * sd;
    const double through_kl = 0.5 * (var - 1.0) * inv_batch;
    const bool inside =
        logvar_raw[i] >= kLogvarMin && logvar_raw[i] <= kLogvarMax;
    grad_logvar[i] = inside ? through_sample + through_kl : 0.0;
  }

  Tensor grad_enc_act = linear_backward(model.enc_mu(), enc_act, grad_mu);
  const Tensor from_logvar =
      linear_backward(model.enc_logvar(), enc_act, grad_logvar);
  for (std::size_t i = 0; i < grad_enc_act.size(); ++i)
    grad_enc_act[i] += from_logvar[i];
  const Tensor grad_enc_pre =
      activation_backward(Activation::relu, enc_pre, grad_enc_act);
  linear_backward(model.enc_hidden(), x, grad_enc_pre);
  return terms;
}

}  // namespace lvae
