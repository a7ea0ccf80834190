#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lsm/errors.hpp"

namespace lsm {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Rank-1..4 dense array, row-major. Batched tensors carry the batch as the
/// leading dimension.
template <typename T>
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 4)
      throw InputError("DenseTensor: rank must be 1..4, got " + std::to_string(shape_.size()));
    data_.assign(shape_size(shape_), fill);
  }
  DenseTensor(Shape shape, std::vector<T> data) : DenseTensor(std::move(shape)) {
    if (data.size() != data_.size())
      throw InputError("DenseTensor: data length does not match shape " + shape_string(shape_));
    data_ = std::move(data);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Elements per leading-dimension slice.
  std::size_t stride0() const noexcept { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

  std::span<T> slice(std::size_t i) noexcept { return {data_.data() + i * stride0(), stride0()}; }
  std::span<const T> slice(std::size_t i) const noexcept {
    return {data_.data() + i * stride0(), stride0()};
  }

  bool operator==(const DenseTensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace lsm
