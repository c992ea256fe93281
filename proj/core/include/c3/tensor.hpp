// Copyright 2026 The C3 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace c3 {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor with value semantics. The last axis is contiguous;
// videos are stored as [T, W, H, C] and batches prepend an N axis.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<Index>(data_.size()) != numel(shape_)) {
      throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  Index size() const noexcept { return static_cast<Index>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  // Negative axes count from the end.
  Index dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw std::out_of_range("tensor axis out of range");
    return shape_[static_cast<std::size_t>(axis)];
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape shape) const& {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    if (numel(shape) != size()) {
      throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " +
                                  shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Row-major flat offset of a multi-index.
inline Index offset_of(const Shape& shape, std::initializer_list<Index> idx) {
  Index off = 0;
  std::size_t a = 0;
  for (Index i : idx) off = off * shape[a++] + i;
  return off;
}

}  // namespace c3
