#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>

#include "lvae/dataset.hpp"
#include "lvae/errors.hpp"

namespace lvae {

namespace fs = std::filesystem;

namespace {

constexpr const char* kImagesFile = "images.idx3-ubyte";
constexpr const char* kLabelsFile = "labels.idx1-ubyte";
constexpr const char* kManifestFile = "manifest.json";

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError(DataErrorReason::io, "cannot write " + p.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError(DataErrorReason::io, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = {{"id", m.id},
       {"provenance", to_string(m.provenance)},
       {"split",
        {{"train", m.split.train}, {"test", m.split.test}, {"warning", m.split.warning}}},
       {"created_at", m.created_at},
       {"count", m.count},
       {"has_labels", m.has_labels}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.id = j.at("id").get<std::string>();
  m.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  const auto& s = j.at("split");
  m.split.train = s.at("train").get<std::vector<std::size_t>>();
  m.split.test = s.at("test").get<std::vector<std::size_t>>();
  m.split.warning = s.value("warning", m.split.test.empty());
  m.created_at = j.value("created_at", "");
  m.count = j.at("count").get<std::size_t>();
  m.has_labels = j.value("has_labels", false);
}

DatasetManifest save_dataset(const DigitDataset& ds, const std::string& id,
                             const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);
  write_bytes(dir / kImagesFile, write_idx_images(ds));
  if (ds.has_labels()) write_bytes(dir / kLabelsFile, write_idx_labels(ds));
  DatasetManifest m{id, ds.provenance, ds.split, utc_timestamp(), ds.size(),
                    ds.has_labels()};
  std::ofstream f(dir / kManifestFile, std::ios::trunc);
  f << nlohmann::json(m).dump(2) << '\n';
  if (!f) throw DataError(DataErrorReason::io, "cannot write manifest in " + dir.string());
  return m;
}

DigitDataset load_dataset(const fs::path& dir, DatasetManifest* manifest) {
  DatasetManifest m;
  try {
    std::ifstream f(dir / kManifestFile);
    if (!f) throw DataError(DataErrorReason::io, "no manifest in " + dir.string());
    m = nlohmann::json::parse(f).get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorReason::io, std::string("bad manifest: ") + e.what());
  }
  const auto images = read_bytes(dir / kImagesFile);
  std::optional<std::vector<std::uint8_t>> labels;
  if (m.has_labels) labels = read_bytes(dir / kLabelsFile);
  DigitDataset ds = labels ? parse_idx(images, std::span<const std::uint8_t>(*labels))
                           : parse_idx(images, std::nullopt);
  if (ds.size() != m.count)
    throw DataError(DataErrorReason::count_mismatch, "manifest count disagrees with images");
  ds.provenance = m.provenance;
  ds.split = m.split;
  ds.validate();
  if (manifest) *manifest = m;
  return ds;
}

}  // namespace lvae
