#include "lvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "lvae/errors.hpp"

namespace lvae {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != product(shape_))
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string());
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() != 2)
    throw DimensionError("expected a matrix, got shape " + shape_string());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2)
    throw DimensionError("expected a matrix, got shape " + shape_string());
  return shape_[1];
}

std::span<double> Tensor::row(std::size_t r) {
  const auto c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const auto c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

Tensor slice_rows(const Tensor& m, std::size_t first, std::size_t count) {
  if (first + count > m.rows() || count == 0)
    throw DimensionError("row slice out of range for shape " +
                         m.shape_string());
  const auto c = m.cols();
  auto src = m.data().subspan(first * c, count * c);
  return Tensor({count, c}, std::vector<double>(src.begin(), src.end()));
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
  const auto c = m.cols();
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows())
      throw DimensionError("row index out of range for shape " +
                           m.shape_string());
    std::ranges::copy(m.row(rows[i]), out.row(i).begin());
  }
  return out;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("cannot stack zero rows");
  const auto width = rows.front().size();
  Tensor out({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width)
      throw DimensionError("row " + std::to_string(i) + " has shape " +
                           rows[i].shape_string() + ", expected width " +
                           std::to_string(width));
    std::ranges::copy(rows[i].data(), out.row(i).begin());
  }
  return out;
}

}  // namespace lvae
