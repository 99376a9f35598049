// focce/tensor.h
//
// Copyright      2026   The focce authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FOCCE_TENSOR_H_
#define FOCCE_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "focce/common.h"

namespace focce {

// Dense row-major tensor of doubles. Tensors are immutable once handed to the
// tape; mutation is confined to construction sites and gradient buffers.
//
// Scalars are rank-0 tensors with one element. Any one-element tensor is
// accepted where a scalar is broadcast against a larger operand.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<int> shape);

  // Validating constructor for data coming from outside the library. Rejects
  // NaN and +/-inf; pass allow_log_zero=true to admit -inf entries (log-space
  // tables use -inf as the probability-zero sentinel).
  Tensor(std::vector<int> shape, std::vector<double> data,
         bool allow_log_zero = false);

  static Tensor Scalar(double v);
  static Tensor Full(std::vector<int> shape, double v);

  int Rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int> &Shape() const { return shape_; }
  int Dim(int axis) const { return shape_[axis]; }
  int64_t NumEl() const { return static_cast<int64_t>(data_.size()); }
  bool Empty() const { return data_.empty() && shape_.empty(); }
  bool IsScalarLike() const { return data_.size() == 1; }

  double *Data() { return data_.data(); }
  const double *Data() const { return data_.data(); }
  double &operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-D / 3-D accessors; no bounds checks beyond debug builds.
  double &At(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  double At(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  double &At(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double At(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  bool SameShape(const Tensor &other) const { return shape_ == other.shape_; }

  // True if every entry is finite or (-inf when allow_log_zero). NaN never
  // passes.
  bool AllFinite(bool allow_log_zero = false) const;

  std::string ShapeString() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

int64_t ShapeNumEl(const std::vector<int> &shape);

}  // namespace focce

#endif  // FOCCE_TENSOR_H_
