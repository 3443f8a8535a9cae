#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lvae/dataset.hpp"
#include "lvae/shadow.hpp"
#include "lvae/trainer.hpp"
#include "lvae/vae.hpp"

namespace httplib {
class Server;
}

namespace lvae::service {

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Conflicting request (model already training, job already finished, ...).
class Conflict : public std::runtime_error {
 public:
  Conflict(std::string reason, const std::string& what)
      : std::runtime_error(what), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

struct Media {
  std::vector<std::uint8_t> bytes;
  std::string content_type;
};

struct SessionRecord {
  std::string id;
  shadow::Level level;
  std::uint64_t seed = 0;
  std::vector<shadow::Action> log;
};

// On-disk layout under the root:
//   datasets/<id>/     images, labels, manifest.json
//   models/<id>.lvae   checkpoint, with <id>.json metadata
//   media/<id>.gif|pgm with <id>.json metadata
//   sessions/<id>.json level, seed and action log
class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::string new_id(const std::string& prefix);

  DatasetManifest put_dataset(const DigitDataset& ds);
  DigitDataset dataset(const std::string& id, DatasetManifest* manifest = nullptr) const;
  std::vector<DatasetManifest> datasets() const;

  void put_model(const std::string& id, const VaeModel& model, const nlohmann::json& meta);
  VaeModel model(const std::string& id) const;
  nlohmann::json model_meta(const std::string& id) const;
  bool has_model(const std::string& id) const;
  std::vector<nlohmann::json> models() const;

  std::string put_media(const std::vector<std::uint8_t>& bytes, const std::string& content_type,
                        nlohmann::json meta);
  Media media(const std::string& id) const;

  void put_session(const SessionRecord& s);
  std::vector<SessionRecord> sessions() const;

 private:
  std::filesystem::path dir(const char* kind) const { return root_ / kind; }

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::mt19937_64 id_rng_;
};

enum class JobState { queued, running, done, failed, cancelled };
std::string to_string(JobState s);

struct JobRecord {
  std::string id;
  std::string kind = "train";
  JobState state = JobState::queued;
  std::string dataset_id;
  std::string model_id;
  std::optional<std::string> base_model_id;  // fine-tuning source
  TrainConfig config;
  std::vector<nlohmann::json> events;
  std::optional<std::string> error;
  std::optional<TrainReport> report;

  bool terminal() const {
    return state == JobState::done || state == JobState::failed || state == JobState::cancelled;
  }
  nlohmann::json to_json() const;
};

// Runs training jobs on a fixed pool of worker threads.
class JobManager {
 public:
  JobManager(Store& store, int workers);
  ~JobManager();

  // Throws Conflict when the target model already has a queued or running job.
  JobRecord submit(const std::string& dataset_id, const TrainConfig& cfg,
                   std::optional<std::string> fine_tune_model);
  JobRecord get(const std::string& id) const;
  std::vector<JobRecord> list() const;
  JobRecord cancel(const std::string& id);

  // Blocks until event `index` exists or the job is terminal (or timeout).
  // Returns events from `index` on and whether the job is terminal.
  std::pair<std::vector<nlohmann::json>, bool> wait_events(const std::string& id,
                                                           std::size_t index,
                                                           std::chrono::milliseconds timeout);
  // Blocks until the job is terminal.
  JobRecord wait(const std::string& id);

 private:
  struct Job {
    JobRecord record;
    std::atomic<bool> cancel{false};
  };

  std::shared_ptr<Job> find(const std::string& id) const;
  void worker();
  void run(Job& job);

  Store& store_;
  mutable std::mutex mu_;
  std::condition_variable queue_cv_;
  std::condition_variable changed_cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

struct ServiceConfig {
  std::filesystem::path store_dir = "lvae-store";
  std::filesystem::path levels_dir;
  int workers = 1;
};

// Port from LVAE_PORT, else `fallback`.
int port_from_env(int fallback = 8080);

class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

  Store& store() { return store_; }
  JobManager& jobs() { return jobs_; }

 private:
  struct LiveSession {
    explicit LiveSession(shadow::GameSession g)
        : game(std::move(g)), last_action(std::chrono::steady_clock::now()) {}
    std::mutex mu;
    shadow::GameSession game;
    std::chrono::steady_clock::time_point last_action;
    long long pending_ms = 0;
  };

  void routes();
  std::shared_ptr<LiveSession> session(const std::string& id);
  nlohmann::json apply_action(const std::string& id, const nlohmann::json& body);
  const shadow::Level& level_by_ref(const nlohmann::json& ref) const;

  ServiceConfig cfg_;
  Store store_;
  JobManager jobs_;
  std::vector<shadow::Level> levels_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
};

}  // namespace lvae::service
