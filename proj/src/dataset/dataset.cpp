#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "lvae/dataset.hpp"
#include "lvae/errors.hpp"
#include "lvae/image.hpp"

namespace lvae {

std::string to_string(Provenance p) {
  return p == Provenance::mnist ? "mnist" : "drawn";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "mnist") return Provenance::mnist;
  if (s == "drawn") return Provenance::drawn;
  throw ConfigError("unknown provenance '" + s + "'");
}

Split make_split(std::size_t count, std::span<const int> labels,
                 std::uint64_t seed) {
  if (!labels.empty() && labels.size() != count)
    throw ConfigError("make_split: label count does not match item count");
  Split split;
  if (count < kMinItemsForSplit) {
    split.train.resize(count);
    std::iota(split.train.begin(), split.train.end(), std::size_t{0});
    split.warning = true;
    return split;
  }

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < count; ++i)
    groups[labels.empty() ? 0 : labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  for (auto& [label, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::lround(kDefaultTestFraction * static_cast<double>(members.size())));
    split.test.insert(split.test.end(), members.begin(),
                      members.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(),
                       members.begin() + static_cast<std::ptrdiff_t>(n_test),
                       members.end());
  }
  std::ranges::sort(split.train);
  std::ranges::sort(split.test);
  split.warning = split.test.empty();
  return split;
}

Tensor DigitDataset::image(std::size_t i) const {
  auto row = images.row(i);
  return Tensor({kImagePixels}, std::vector<double>(row.begin(), row.end()));
}

Tensor DigitDataset::train_images() const {
  if (split.train.empty()) throw ConfigError("dataset has no training images");
  return gather_rows(images, split.train);
}

Tensor DigitDataset::test_images() const {
  if (split.test.empty()) throw ConfigError("dataset has no test images");
  return gather_rows(images, split.test);
}

void DigitDataset::validate() const {
  if (images.empty()) throw ConfigError("dataset is empty");
  if (images.rank() != 2 || images.cols() != kImagePixels)
    throw DimensionError("dataset images must be [N, 784], got " +
                         images.shape_string());
  for (double v : images.data())
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError("dataset pixel outside [0, 1]");
  if (!labels.empty() && labels.size() != size())
    throw ConfigError("dataset label count does not match image count");
  std::vector<int> seen(size(), 0);
  for (const auto* part : {&split.train, &split.test})
    for (auto i : *part) {
      if (i >= size()) throw ConfigError("split index out of range");
      ++seen[i];
    }
  if (std::ranges::any_of(seen, [](int n) { return n != 1; }))
    throw ConfigError("split is not a partition of the dataset");
}

DigitDataset select_digits(const DigitDataset& ds, std::span<const int> digits,
                           std::optional<std::size_t> limit,
                           std::uint64_t split_seed) {
  if (!digits.empty() && !ds.has_labels())
    throw ConfigError("cannot filter by digit: dataset has no labels");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (limit && keep.size() >= *limit) break;
    if (digits.empty() || std::ranges::find(digits, ds.labels[i]) != digits.end())
      keep.push_back(i);
  }
  if (keep.empty()) throw ConfigError("digit selection is empty");
  DigitDataset out;
  out.provenance = ds.provenance;
  out.images = gather_rows(ds.images, keep);
  if (ds.has_labels())
    for (auto i : keep) out.labels.push_back(ds.labels[i]);
  out.split = make_split(keep.size(), out.labels, split_seed);
  return out;
}

DigitDataset build_drawn_dataset(std::span<const StrokeSet> digit_a_strokes,
                                 std::span<const StrokeSet> digit_b_strokes,
                                 std::size_t num_images_per_digit, int digit_a,
                                 int digit_b, std::uint64_t split_seed) {
  if (num_images_per_digit == 0)
    throw ConfigError("num_images_per_digit must be positive");
  if (digit_a_strokes.size() != num_images_per_digit ||
      digit_b_strokes.size() != num_images_per_digit)
    throw ConfigError("expected " + std::to_string(num_images_per_digit) +
                      " drawings per digit, got " +
                      std::to_string(digit_a_strokes.size()) + " and " +
                      std::to_string(digit_b_strokes.size()));
  std::vector<Tensor> rows;
  DigitDataset ds;
  ds.provenance = Provenance::drawn;
  for (const auto& s : digit_a_strokes) {
    rows.push_back(rasterize(s));
    ds.labels.push_back(digit_a);
  }
  for (const auto& s : digit_b_strokes) {
    rows.push_back(rasterize(s));
    ds.labels.push_back(digit_b);
  }
  ds.images = stack_rows(rows);
  ds.split = make_split(rows.size(), ds.labels, split_seed);
  return ds;
}

}  // namespace lvae
