#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lvae/dataset.hpp"
#include "lvae/image.hpp"

namespace lvae {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t(bytes[at]) << 24) | (std::uint32_t(bytes[at + 1]) << 16) |
         (std::uint32_t(bytes[at + 2]) << 8) | std::uint32_t(bytes[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace

std::string to_string(DataErrorReason reason) {
  switch (reason) {
    case DataErrorReason::bad_magic: return "bad_magic";
    case DataErrorReason::truncated: return "truncated";
    case DataErrorReason::trailing_data: return "trailing_data";
    case DataErrorReason::count_mismatch: return "count_mismatch";
    case DataErrorReason::bad_dimensions: return "bad_dimensions";
    case DataErrorReason::empty_drawing: return "empty_drawing";
    case DataErrorReason::invalid_strokes: return "invalid_strokes";
    case DataErrorReason::io: return "io";
  }
  return "unknown";
}

DigitDataset parse_idx(std::span<const std::uint8_t> images,
                       std::optional<std::span<const std::uint8_t>> labels,
                       std::uint64_t split_seed) {
  if (images.size() < 16)
    throw DataError(DataErrorReason::truncated, "IDX images: header truncated");
  const auto magic = read_be32(images, 0);
  if (magic != kIdxImagesMagic)
    throw DataError(DataErrorReason::bad_magic,
                    "IDX images: bad magic " + hex32(magic));
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  if (rows != kImageSide || cols != kImageSide)
    throw DataError(DataErrorReason::bad_dimensions,
                    "IDX images: expected 28x28, got " + std::to_string(rows) +
                        "x" + std::to_string(cols));
  if (count == 0)
    throw DataError(DataErrorReason::count_mismatch, "IDX images: zero images");
  const std::size_t payload = count * kImagePixels;
  if (images.size() < 16 + payload)
    throw DataError(DataErrorReason::truncated,
                    "IDX images: header declares " + std::to_string(count) +
                        " images but payload holds " +
                        std::to_string((images.size() - 16) / kImagePixels));
  if (images.size() > 16 + payload)
    throw DataError(DataErrorReason::trailing_data,
                    "IDX images: unexpected bytes after payload");

  DigitDataset ds;
  ds.provenance = Provenance::mnist;
  ds.images = Tensor({count, kImagePixels});
  auto px = ds.images.data();
  for (std::size_t i = 0; i < payload; ++i) px[i] = images[16 + i] / 255.0;

  if (labels) {
    const auto lb = *labels;
    if (lb.size() < 8)
      throw DataError(DataErrorReason::truncated, "IDX labels: header truncated");
    const auto lmagic = read_be32(lb, 0);
    if (lmagic != kIdxLabelsMagic)
      throw DataError(DataErrorReason::bad_magic,
                      "IDX labels: bad magic " + hex32(lmagic));
    const std::size_t lcount = read_be32(lb, 4);
    if (lcount != count)
      throw DataError(DataErrorReason::count_mismatch,
                      "IDX labels: " + std::to_string(lcount) +
                          " labels for " + std::to_string(count) + " images");
    if (lb.size() < 8 + lcount)
      throw DataError(DataErrorReason::truncated, "IDX labels: payload truncated");
    if (lb.size() > 8 + lcount)
      throw DataError(DataErrorReason::trailing_data,
                      "IDX labels: unexpected bytes after payload");
    ds.labels.assign(lb.begin() + 8, lb.end());
  }
  ds.split = make_split(count, ds.labels, split_seed);
  return ds;
}

std::vector<std::uint8_t> write_idx_images(const DigitDataset& ds) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + ds.images.size());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.size()));
  put_be32(out, kImageSide);
  put_be32(out, kImageSide);
  for (double v : ds.images.data()) out.push_back(to_byte(v));
  return out;
}

std::vector<std::uint8_t> write_idx_labels(const DigitDataset& ds) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(ds.labels.size()));
  for (int l : ds.labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

}  // namespace lvae
