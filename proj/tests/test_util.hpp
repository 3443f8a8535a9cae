#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "lvae/tensor.hpp"

namespace testutil {

inline lvae::Tensor random_tensor(std::vector<std::size_t> shape,
                                  std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  lvae::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

// Random 8-bit images (k / 255), with about half the pixels blank and the
// ink levels restricted to multiples of 5.
inline lvae::Tensor random_images(std::size_t batch, std::mt19937_64& rng) {
  lvae::Tensor t({batch, 784});
  std::uniform_int_distribution<int> level(0, 51);
  std::bernoulli_distribution blank(0.5);
  for (auto& v : t.data()) v = blank(rng) ? 0.0 : level(rng) * 5 / 255.0;
  return t;
}

// |a - b| / max(|a|, |b|, floor): relative error, measured absolutely
// against `floor` when both values are tiny.
inline double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
