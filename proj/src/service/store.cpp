#include <fstream>
#include <iterator>
#include <regex>

#include "lvae/errors.hpp"
#include "lvae/service.hpp"

namespace lvae::service {

namespace fs = std::filesystem;

namespace {

void check_id(const std::string& id) {
  static const std::regex ok("[a-z]+-[0-9a-f]{1,32}");
  if (!std::regex_match(id, ok)) throw NotFound("no such id '" + id + "'");
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw NotFound("missing " + p.filename().string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Write-then-rename so readers never see a half-written file.
void write_atomic(const fs::path& p, const void* data, std::size_t size) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  write_atomic(p, text.data(), text.size());
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw NotFound("missing " + p.filename().string());
  return nlohmann::json::parse(f);
}

std::string extension_for(const std::string& content_type) {
  if (content_type == "image/gif") return ".gif";
  if (content_type == "image/x-portable-graymap") return ".pgm";
  return ".bin";
}

}  // namespace

Store::Store(fs::path root) : root_(std::move(root)), id_rng_(std::random_device{}()) {
  for (const char* kind : {"datasets", "models", "media", "sessions"})
    fs::create_directories(dir(kind));
}

std::string Store::new_id(const std::string& prefix) {
  std::lock_guard lock(mu_);
  for (;;) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
    std::string id = prefix + "-" + std::string(buf, 12);
    if (!fs::exists(dir("datasets") / id) && !fs::exists(dir("models") / (id + ".json")) &&
        !fs::exists(dir("media") / (id + ".json")) && !fs::exists(dir("sessions") / (id + ".json")))
      return id;
  }
}

DatasetManifest Store::put_dataset(const DigitDataset& ds) {
  const std::string id = new_id("d");
  return save_dataset(ds, id, dir("datasets") / id);
}

DigitDataset Store::dataset(const std::string& id, DatasetManifest* manifest) const {
  check_id(id);
  const fs::path p = dir("datasets") / id;
  if (!fs::is_directory(p)) throw NotFound("no dataset '" + id + "'");
  return load_dataset(p, manifest);
}

std::vector<DatasetManifest> Store::datasets() const {
  std::vector<DatasetManifest> out;
  for (const auto& e : fs::directory_iterator(dir("datasets"))) {
    try {
      out.push_back(read_json(e.path() / "manifest.json").get<DatasetManifest>());
    } catch (const std::exception&) {
      // half-written or foreign directory
    }
  }
  std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.created_at < b.created_at; });
  return out;
}

void Store::put_model(const std::string& id, const VaeModel& model, const nlohmann::json& meta) {
  check_id(id);
  const auto bytes = checkpoint_bytes(model);
  write_atomic(dir("models") / (id + ".lvae"), bytes.data(), bytes.size());
  write_json(dir("models") / (id + ".json"), meta);
}

VaeModel Store::model(const std::string& id) const {
  check_id(id);
  const fs::path p = dir("models") / (id + ".lvae");
  if (!fs::exists(p)) throw NotFound("no model '" + id + "'");
  return model_from_checkpoint(read_bytes(p));
}

nlohmann::json Store::model_meta(const std::string& id) const {
  check_id(id);
  const fs::path p = dir("models") / (id + ".json");
  if (!fs::exists(p)) throw NotFound("no model '" + id + "'");
  return read_json(p);
}

bool Store::has_model(const std::string& id) const {
  try {
    check_id(id);
  } catch (const NotFound&) {
    return false;
  }
  return fs::exists(dir("models") / (id + ".lvae"));
}

std::vector<nlohmann::json> Store::models() const {
  std::vector<nlohmann::json> out;
  for (const auto& e : fs::directory_iterator(dir("models")))
    if (e.path().extension() == ".json") out.push_back(read_json(e.path()));
  return out;
}

std::string Store::put_media(const std::vector<std::uint8_t>& bytes,
                             const std::string& content_type, nlohmann::json meta) {
  const std::string id = new_id("m");
  const std::string ext = extension_for(content_type);
  write_atomic(dir("media") / (id + ext), bytes.data(), bytes.size());
  meta["id"] = id;
  meta["content_type"] = content_type;
  meta["file"] = id + ext;
  meta["created_at"] = utc_timestamp();
  write_json(dir("media") / (id + ".json"), meta);
  return id;
}

Media Store::media(const std::string& id) const {
  check_id(id);
  const fs::path meta_path = dir("media") / (id + ".json");
  if (!fs::exists(meta_path)) throw NotFound("no media '" + id + "'");
  const auto meta = read_json(meta_path);
  return {read_bytes(dir("media") / meta.at("file").get<std::string>()),
          meta.at("content_type").get<std::string>()};
}

void Store::put_session(const SessionRecord& s) {
  check_id(s.id);
  write_json(dir("sessions") / (s.id + ".json"),
             {{"id", s.id}, {"level", s.level}, {"seed", s.seed}, {"log", s.log}});
}

std::vector<SessionRecord> Store::sessions() const {
  std::vector<SessionRecord> out;
  for (const auto& e : fs::directory_iterator(dir("sessions"))) {
    if (e.path().extension() != ".json") continue;
    try {
      const auto j = read_json(e.path());
      out.push_back({j.at("id").get<std::string>(), j.at("level").get<shadow::Level>(),
                     j.at("seed").get<std::uint64_t>(),
                     j.at("log").get<std::vector<shadow::Action>>()});
    } catch (const std::exception&) {
      // skip unreadable snapshots
    }
  }
  return out;
}

}  // namespace lvae::service
