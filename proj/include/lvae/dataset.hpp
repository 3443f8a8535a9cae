#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvae/tensor.hpp"

namespace lvae {

// Machine-readable reason codes for ingestion failures.
enum class DataErrorReason {
  bad_magic,
  truncated,
  trailing_data,
  count_mismatch,
  bad_dimensions,
  empty_drawing,
  invalid_strokes,
  io,
};

std::string to_string(DataErrorReason reason);

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorReason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}
  DataErrorReason reason() const noexcept { return reason_; }

 private:
  DataErrorReason reason_;
};

enum class Provenance { mnist, drawn };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
  bool warning = false;            // set when the test side came out empty

  bool operator==(const Split&) const = default;
};

inline constexpr double kDefaultTestFraction = 0.2;
// Below this many items everything goes to train and the warning is set.
inline constexpr std::size_t kMinItemsForSplit = 5;

// Seeded 80/20 split. With labels the split is stratified: each label
// contributes round(0.2 * count) items to the test side.
Split make_split(std::size_t count, std::span<const int> labels,
                 std::uint64_t seed);

// 28x28 grayscale digits in [0, 1] (8-bit quantised) with a train/test split.
struct DigitDataset {
  Tensor images;            // [N, 784]
  std::vector<int> labels;  // empty, or one per image
  Split split;
  Provenance provenance = Provenance::mnist;

  std::size_t size() const { return images.empty() ? 0 : images.rows(); }
  bool has_labels() const { return !labels.empty(); }
  Tensor image(std::size_t i) const;
  Tensor train_images() const;
  Tensor test_images() const;

  // Checks shape, value range and that the split partitions [0, N).
  void validate() const;

  bool operator==(const DigitDataset&) const = default;
};

// --- IDX ---------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Parses an IDX3 image stream (and optional IDX1 label stream) of 28x28
// images. Pixels become byte / 255; the split is the seeded default.
DigitDataset parse_idx(std::span<const std::uint8_t> images,
                       std::optional<std::span<const std::uint8_t>> labels,
                       std::uint64_t split_seed = 0);

std::vector<std::uint8_t> write_idx_images(const DigitDataset& ds);
std::vector<std::uint8_t> write_idx_labels(const DigitDataset& ds);

// Keeps the images whose label is in `digits` (all when empty), at most
// `limit` of them in file order, and re-splits.
DigitDataset select_digits(const DigitDataset& ds, std::span<const int> digits,
                           std::optional<std::size_t> limit,
                           std::uint64_t split_seed = 0);

// --- Drawing -------------------------------------------------------------

struct CanvasPoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const CanvasPoint&) const = default;
};

inline constexpr int kDefaultCanvasSize = 280;
inline constexpr double kDefaultPenWidth = 18.0;

struct StrokeSet {
  int canvas_size = kDefaultCanvasSize;
  double pen_width = kDefaultPenWidth;
  std::vector<std::vector<CanvasPoint>> strokes;

  bool operator==(const StrokeSet&) const = default;
};

void to_json(nlohmann::json& j, const StrokeSet& s);
void from_json(const nlohmann::json& j, StrokeSet& s);

// Round pen at canvas resolution, crop to the ink box plus a 2-pixel margin,
// area-average down to 20 pixels on the long side, and place by centre of
// mass in a 28x28 frame. Output is quantised to k / 255.
Tensor rasterize(const StrokeSet& strokes);

// Canvas-resolution ink mask (row-major, canvas_size^2), 1 where inked.
std::vector<std::uint8_t> rasterize_canvas(const StrokeSet& strokes);

// 2 * n images labelled digit_a then digit_b, stratified 80/20 split.
DigitDataset build_drawn_dataset(std::span<const StrokeSet> digit_a_strokes,
                                 std::span<const StrokeSet> digit_b_strokes,
                                 std::size_t num_images_per_digit,
                                 int digit_a = 0, int digit_b = 1,
                                 std::uint64_t split_seed = 0);

// --- Persistence -----------------------------------------------------------

struct DatasetManifest {
  std::string id;
  Provenance provenance = Provenance::mnist;
  Split split;
  std::string created_at;  // ISO-8601 UTC
  std::size_t count = 0;
  bool has_labels = false;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

// Writes images.idx3-ubyte, labels.idx1-ubyte (when labelled) and
// manifest.json into `dir`, creating it.
DatasetManifest save_dataset(const DigitDataset& ds, const std::string& id,
                             const std::filesystem::path& dir);
DigitDataset load_dataset(const std::filesystem::path& dir,
                          DatasetManifest* manifest = nullptr);

std::string utc_timestamp();

}  // namespace lvae
