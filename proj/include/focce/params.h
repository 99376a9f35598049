// focce/params.h
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

#ifndef FOCCE_PARAMS_H_
#define FOCCE_PARAMS_H_

#include <map>
#include <string>
#include <vector>

#include "focce/autodiff.h"
#include "focce/tensor.h"

namespace focce {

// Named parameter registry. Handles are dense indices assigned at Add time;
// modules keep handles, the trainer and serializer walk the registry.
class ParamSet {
 public:
  int Add(const std::string &name, Tensor init);
  int Find(const std::string &name) const;  // -1 when absent
  int Size() const { return static_cast<int>(params_.size()); }
  const std::string &Name(int h) const { return params_[h].name; }
  Tensor &Value(int h) { return params_[h].value; }
  const Tensor &Value(int h) const { return params_[h].value; }
  int64_t TotalElements() const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
  };
  std::vector<Entry> params_;
  std::map<std::string, int> index_;
};

// Parameters mounted onto a tape as differentiable leaves, indexed by handle.
struct Mounted {
  ad::Tape *tape = nullptr;
  std::vector<ad::Var> vars;
  const ad::Var &operator[](int h) const { return vars[h]; }
};

Mounted MountParams(ad::Tape &tape, const ParamSet &ps,
                    bool requires_grad = true);

// Gradients for every handle of a mounted set, in handle order.
std::vector<Tensor> CollectGrads(ad::Tape &tape, const Mounted &mounted);

double GlobalNorm(const std::vector<Tensor> &grads);
// Rescales in place so the global norm is at most max_norm.
void ClipByGlobalNorm(std::vector<Tensor> *grads, double max_norm);

// Plain gradient-descent step: p -= lr * g.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void Step(ParamSet *ps, const std::vector<Tensor> &grads);

 private:
  double lr_;
};

// Adam-style adaptive step with bias correction.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void Step(ParamSet *ps, const std::vector<Tensor> &grads);

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace focce

#endif  // FOCCE_PARAMS_H_
