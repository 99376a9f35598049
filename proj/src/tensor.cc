// focce/tensor.cc
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

#include "focce/tensor.h"

#include <cmath>
#include <sstream>

namespace focce {

int64_t ShapeNumEl(const std::vector<int> &shape) {
  int64_t n = 1;
  for (int d : shape) {
    FOCCE_CHECK_MSG(d >= 0, "negative dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(ShapeNumEl(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data,
               bool allow_log_zero)
    : shape_(std::move(shape)), data_(std::move(data)) {
  FOCCE_CHECK_MSG(ShapeNumEl(shape_) == static_cast<int64_t>(data_.size()),
                  "shape/data size mismatch");
  for (double v : data_) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity() ||
        (v == kLogZero && !allow_log_zero)) {
      throw ContractError("non-finite value in tensor construction");
    }
  }
}

Tensor Tensor::Scalar(double v) {
  Tensor t;
  t.data_.assign(1, v);
  return t;
}

Tensor Tensor::Full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  for (auto &x : t.data_) x = v;
  return t;
}

bool Tensor::AllFinite(bool allow_log_zero) const {
  for (double v : data_) {
    if (std::isfinite(v)) continue;
    if (allow_log_zero && v == kLogZero) continue;
    return false;
  }
  return true;
}

std::string Tensor::ShapeString() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

}  // namespace focce
