#include "lvae/errors.hpp"
#include "lvae/service.hpp"

namespace lvae::service {

std::string to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
    case JobState::cancelled: return "cancelled";
  }
  return "?";
}

nlohmann::json JobRecord::to_json() const {
  nlohmann::json j = {{"id", id},
                      {"kind", kind},
                      {"state", lvae::service::to_string(state)},
                      {"dataset_id", dataset_id},
                      {"model_id", model_id},
                      {"config", config},
                      {"events", events}};
  if (base_model_id) j["base_model_id"] = *base_model_id;
  if (error) j["error"] = *error;
  if (report) j["report"] = *report;
  return j;
}

JobManager::JobManager(Store& store, int workers) : store_(store) {
  for (int i = 0; i < std::max(1, workers); ++i) threads_.emplace_back([this] { worker(); });
}

JobManager::~JobManager() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    for (auto& [id, job] : jobs_) job->cancel = true;
  }
  queue_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::shared_ptr<JobManager::Job> JobManager::find(const std::string& id) const {
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFound("no job '" + id + "'");
  return it->second;
}

JobRecord JobManager::submit(const std::string& dataset_id, const TrainConfig& cfg,
                             std::optional<std::string> fine_tune_model) {
  cfg.validate();
  store_.dataset(dataset_id);  // 404 early for unknown datasets
  if (fine_tune_model && !store_.has_model(*fine_tune_model))
    throw NotFound("no model '" + *fine_tune_model + "'");

  auto job = std::make_shared<Job>();
  job->record.id = store_.new_id("j");
  job->record.dataset_id = dataset_id;
  job->record.config = cfg;
  job->record.base_model_id = fine_tune_model;
  job->record.model_id = fine_tune_model ? *fine_tune_model : store_.new_id("v");

  std::lock_guard lock(mu_);
  for (const auto& [id, other] : jobs_)
    if (other->record.model_id == job->record.model_id && !other->record.terminal())
      throw Conflict("model_busy", "model '" + job->record.model_id + "' is already training");
  jobs_[job->record.id] = job;
  queue_.push_back(job);
  queue_cv_.notify_one();
  return job->record;
}

JobRecord JobManager::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  return find(id)->record;
}

std::vector<JobRecord> JobManager::list() const {
  std::lock_guard lock(mu_);
  std::vector<JobRecord> out;
  for (const auto& [id, job] : jobs_) out.push_back(job->record);
  return out;
}

JobRecord JobManager::cancel(const std::string& id) {
  std::lock_guard lock(mu_);
  auto job = find(id);
  job->cancel = true;
  if (job->record.state == JobState::queued) {
    job->record.state = JobState::cancelled;
    changed_cv_.notify_all();
  }
  return job->record;
}

std::pair<std::vector<nlohmann::json>, bool> JobManager::wait_events(
    const std::string& id, std::size_t index, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  auto job = find(id);
  changed_cv_.wait_for(lock, timeout, [&] {
    return job->record.events.size() > index || job->record.terminal();
  });
  std::vector<nlohmann::json> out;
  for (std::size_t i = index; i < job->record.events.size(); ++i)
    out.push_back(job->record.events[i]);
  return {out, job->record.terminal()};
}

JobRecord JobManager::wait(const std::string& id) {
  std::unique_lock lock(mu_);
  auto job = find(id);
  changed_cv_.wait(lock, [&] { return job->record.terminal(); });
  return job->record;
}

void JobManager::worker() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mu_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
      if (job->record.state != JobState::queued) continue;
      job->record.state = JobState::running;
      changed_cv_.notify_all();
    }
    run(*job);
  }
}

void JobManager::run(Job& job) {
  auto finish = [&](JobState state, std::optional<std::string> error,
                    std::optional<TrainReport> report) {
    std::lock_guard lock(mu_);
    job.record.state = state;
    job.record.error = std::move(error);
    job.record.report = std::move(report);
    changed_cv_.notify_all();
  };
  try {
    const JobRecord rec = [&] {
      std::lock_guard lock(mu_);
      return job.record;
    }();
    const DigitDataset data = store_.dataset(rec.dataset_id);
    VaeModel model = rec.base_model_id ? store_.model(*rec.base_model_id) : VaeModel();
    TrainReport report = train(
        model, data, rec.config,
        [&](const EpochMetrics& m) {
          std::lock_guard lock(mu_);
          job.record.events.push_back(nlohmann::json(m));
          changed_cv_.notify_all();
        },
        &job.cancel);
    report.model_id = rec.model_id;
    nlohmann::json meta = {{"id", rec.model_id},
                           {"dataset_id", rec.dataset_id},
                           {"config", rec.config},
                           {"hidden_dim", model.hidden_dim()},
                           {"latent_dim", model.latent_dim()},
                           {"report", report},
                           {"job_id", rec.id},
                           {"created_at", utc_timestamp()}};
    if (rec.base_model_id) meta["base_model_id"] = *rec.base_model_id;
    store_.put_model(rec.model_id, model, meta);
    finish(JobState::done, std::nullopt, report);
  } catch (const Cancelled&) {
    finish(JobState::cancelled, std::nullopt, std::nullopt);
  } catch (const DivergedError& e) {
    finish(JobState::failed, "diverged in epoch " + std::to_string(e.epoch()) + ": " + e.what(),
           std::nullopt);
  } catch (const std::exception& e) {
    finish(JobState::failed, e.what(), std::nullopt);
  }
}

}  // namespace lvae::service
