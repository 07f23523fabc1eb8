// Copyright 2026 The SCH Codec Authors. All Rights Reserved.
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

#ifndef SCH_TENSOR_H_
#define SCH_TENSOR_H_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sch/errors.h"

namespace sch {

using Shape = std::vector<int64_t>;

inline int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string ShapeString(const Shape& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Buffers start on a 64-byte boundary. Vectorised Eigen kernels pick their
// summation order from the pointer alignment, so this keeps results
// reproducible from run to run (and encoder equal to decoder).
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Dense row-major N-dimensional array. Value semantics; copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}
  Tensor(Shape shape, const std::vector<T>& data)
      : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end())) {}
  Tensor(Shape shape, AlignedVector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != NumElements(shape_)) {
      throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                           " does not match shape " + ShapeString(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const {
    return shape_[i < 0 ? shape_.size() + i : static_cast<size_t>(i)];
  }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  // Indexing for the common [C, H, W] and [B, C, H, W] layouts.
  T& at(int64_t c, int64_t y, int64_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(int64_t c, int64_t y, int64_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  T& at(int64_t b, int64_t c, int64_t y, int64_t x) {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  const T& at(int64_t b, int64_t c, int64_t y, int64_t x) const {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  // Same data, new shape with equal element count.
  Tensor Reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }
  void Reshape(Shape shape) {
    if (NumElements(shape) != numel()) {
      throw DimensionError("cannot reshape " + ShapeString(shape_) + " to " +
                           ShapeString(shape));
    }
    shape_ = std::move(shape);
  }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> Cast() const {
    return Tensor<U>(shape_, AlignedVector<U>(data_.begin(), data_.end()));
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

}  // namespace sch

#endif  // SCH_TENSOR_H_
