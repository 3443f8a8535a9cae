#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lvae/dataset.hpp"
#include "lvae/vae.hpp"
#include "json.hpp"

namespace lvae {

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::optional<int> freeze_up_to;
  std::size_t latent_dim = kDefaultLatentDim;
  std::size_t hidden_dim = kDefaultHiddenDim;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_total = 0.0;
  double train_bce = 0.0;
  double train_kl = 0.0;
  std::optional<double> test_total;  // absent when the test split is empty
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  std::string model_id;

  // Equality ignoring wall time.
  bool same_metrics(const TrainReport& other) const;
};

using ProgressSink = std::function<void(const EpochMetrics&)>;

inline constexpr std::uint64_t kEvalSeed = 0xe7a1;

// Adam with beta1 0.9, beta2 0.999, eps 1e-8. An empty model is initialised
// from cfg (hidden_dim, latent_dim, seed); otherwise it is fine-tuned in
// place. `cancel` is polled between batches and raises Cancelled.
TrainReport train(VaeModel& model, const DigitDataset& data,
                  const TrainConfig& cfg, const ProgressSink& progress = {},
                  const std::atomic<bool>* cancel = nullptr);

// Mean negative ELBO over `images` [N, 784], sampling z with `eval_seed`.
double evaluate(const VaeModel& model, const Tensor& images,
                std::uint64_t eval_seed = kEvalSeed);

// Shuffled minibatches covering `items` once.
std::vector<std::vector<std::size_t>> epoch_batches(
    std::vector<std::size_t> items, std::size_t batch_size, Rng& rng);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
// The progress event record: {epoch, train_total, train_bce, train_kl, test_total}.
void to_json(nlohmann::json& j, const EpochMetrics& m);
void to_json(nlohmann::json& j, const TrainReport& r);

}  // namespace lvae
