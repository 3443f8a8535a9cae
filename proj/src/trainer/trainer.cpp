#include "lvae/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lvae/errors.hpp"

namespace lvae {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::size_t kEvalChunk = 256;

class Adam {
 public:
  Adam(const VaeModel& model, double lr) : lr_(lr) {
    for (int i = 0; i < VaeModel::kLayerCount; ++i) {
      const auto& layer = model.layer(i);
      m_[i][0].assign(layer.weights.size(), 0.0);
      v_[i][0].assign(layer.weights.size(), 0.0);
      m_[i][1].assign(layer.bias.size(), 0.0);
      v_[i][1].assign(layer.bias.size(), 0.0);
    }
  }

  void step(VaeModel& model) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (int i = 0; i < VaeModel::kLayerCount; ++i) {
      model.layer(i).apply_update(
          [&](std::span<double> values, std::span<const double> grads, int slot) {
            auto& m = m_[i][slot];
            auto& v = v_[i][slot];
            for (std::size_t k = 0; k < values.size(); ++k) {
              const double g = grads[k];
              m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g;
              v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g * g;
              values[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEps);
            }
          });
    }
  }

 private:
  double lr_;
  long long t_ = 0;
  std::array<std::array<std::vector<double>, 2>, VaeModel::kLayerCount> m_, v_;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (freeze_up_to && (*freeze_up_to < 0 || *freeze_up_to >= VaeModel::kLayerCount))
    throw ConfigError("freeze_up_to must be a layer index in [0, 4]");
}

bool TrainReport::same_metrics(const TrainReport& other) const {
  if (model_id != other.model_id || epochs.size() != other.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || a.train_total != b.train_total || a.train_bce != b.train_bce ||
        a.train_kl != b.train_kl || a.test_total != b.test_total)
      return false;
  }
  return true;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::vector<std::size_t> items,
                                                    std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::shuffle(items.begin(), items.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < items.size(); at += batch_size) {
    const auto end = std::min(items.size(), at + batch_size);
    batches.emplace_back(items.begin() + at, items.begin() + end);
  }
  return batches;
}

double evaluate(const VaeModel& model, const Tensor& images, std::uint64_t eval_seed) {
  if (model.empty()) throw ModelError("cannot evaluate an empty model");
  if (images.empty() || images.rows() == 0) throw ConfigError("evaluation split is empty");
  Rng rng(eval_seed);
  const Tensor eps = standard_normal({images.rows(), model.latent_dim()}, rng);
  double sum = 0.0;
  for (std::size_t at = 0; at < images.rows(); at += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, images.rows() - at);
    const Tensor x = slice_rows(images, at, n);
    const LatentCode code = encode(model, x);
    const Tensor z = reparameterize(code.mu, code.logvar, slice_rows(eps, at, n));
    sum += loss(x, decode(model, z), code.mu, code.logvar).total * double(n);
  }
  return sum / double(images.rows());
}

TrainReport train(VaeModel& model, const DigitDataset& data, const TrainConfig& cfg,
                  const ProgressSink& progress, const std::atomic<bool>* cancel) {
  cfg.validate();
  if (data.size() == 0 || data.split.train.empty())
    throw ConfigError("training set is empty");
  if (model.empty())
    model = VaeModel::initialized(cfg.hidden_dim, cfg.latent_dim, cfg.seed);
  model.freeze_up_to(cfg.freeze_up_to);
  model.zero_grads();

  TrainReport report;
  if (cfg.epochs == 0) return report;

  const std::size_t batch_size = std::min(cfg.batch_size, data.split.train.size());
  const std::optional<Tensor> test =
      data.split.test.empty() ? std::nullopt : std::optional(data.test_images());
  Adam adam(model, cfg.learning_rate);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    for (const auto& batch : epoch_batches(data.split.train, batch_size, rng)) {
      if (cancel && cancel->load()) throw Cancelled();
      const Tensor x = gather_rows(data.images, batch);
      const Tensor eps = standard_normal({batch.size(), model.latent_dim()}, rng);
      const LossTerms terms = forward_backward(model, x, eps);
      if (!std::isfinite(terms.total))
        throw DivergedError(epoch, "loss became non-finite in epoch " + std::to_string(epoch));
      adam.step(model);
      const double w = double(batch.size());
      m.train_total += terms.total * w;
      m.train_bce += terms.bce * w;
      m.train_kl += terms.kl * w;
    }
    const double n = double(data.split.train.size());
    m.train_total /= n;
    m.train_bce /= n;
    m.train_kl /= n;
    if (test) {
      m.test_total = evaluate(model, *test);
      if (!std::isfinite(*m.test_total))
        throw DivergedError(epoch,
                            "test loss became non-finite in epoch " + std::to_string(epoch));
    }
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(m);
    if (progress) progress(m);
  }
  return report;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"seed", c.seed},
       {"freeze_up_to", c.freeze_up_to ? nlohmann::json(*c.freeze_up_to) : nlohmann::json()},
       {"latent_dim", c.latent_dim},
       {"hidden_dim", c.hidden_dim}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  try {
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.seed = j.value("seed", d.seed);
    c.latent_dim = j.value("latent_dim", d.latent_dim);
    c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
    c.freeze_up_to.reset();
    if (j.contains("freeze_up_to") && !j["freeze_up_to"].is_null())
      c.freeze_up_to = j["freeze_up_to"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = {{"epoch", m.epoch},
       {"train_total", m.train_total},
       {"train_bce", m.train_bce},
       {"train_kl", m.train_kl},
       {"test_total", m.test_total ? nlohmann::json(*m.test_total) : nlohmann::json()}};
}

void to_json(nlohmann::json& j, const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& m : r.epochs) {
    nlohmann::json e = m;
    e["wall_seconds"] = m.wall_seconds;
    epochs.push_back(std::move(e));
  }
  j = {{"epochs", std::move(epochs)}, {"model_id", r.model_id}};
}

}  // namespace lvae
