// focce/params.cc
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

#include "focce/params.h"

#include <cmath>

#include "focce/common.h"

namespace focce {

int ParamSet::Add(const std::string &name, Tensor init) {
  FOCCE_CHECK_MSG(index_.find(name) == index_.end(),
                  "duplicate parameter name " + name);
  FOCCE_CHECK_MSG(init.AllFinite(false), "non-finite init for " + name);
  int h = static_cast<int>(params_.size());
  params_.push_back(Entry{name, std::move(init)});
  index_[name] = h;
  return h;
}

int ParamSet::Find(const std::string &name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

int64_t ParamSet::TotalElements() const {
  int64_t n = 0;
  for (const Entry &e : params_) n += e.value.NumEl();
  return n;
}

Mounted MountParams(ad::Tape &tape, const ParamSet &ps, bool requires_grad) {
  Mounted m;
  m.tape = &tape;
  m.vars.reserve(ps.Size());
  for (int h = 0; h < ps.Size(); ++h)
    m.vars.push_back(tape.Leaf(ps.Value(h), requires_grad));
  return m;
}

std::vector<Tensor> CollectGrads(ad::Tape &tape, const Mounted &mounted) {
  std::vector<Tensor> out;
  out.reserve(mounted.vars.size());
  for (const ad::Var &v : mounted.vars) out.push_back(tape.GradOf(v));
  return out;
}

double GlobalNorm(const std::vector<Tensor> &grads) {
  double sq = 0.0;
  for (const Tensor &g : grads)
    for (int64_t i = 0; i < g.NumEl(); ++i) sq += g[i] * g[i];
  return std::sqrt(sq);
}

void ClipByGlobalNorm(std::vector<Tensor> *grads, double max_norm) {
  double norm = GlobalNorm(*grads);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (Tensor &g : *grads)
    for (int64_t i = 0; i < g.NumEl(); ++i) g[i] *= scale;
}

void SgdOptimizer::Step(ParamSet *ps, const std::vector<Tensor> &grads) {
  FOCCE_CHECK(static_cast<int>(grads.size()) == ps->Size());
  for (int h = 0; h < ps->Size(); ++h) {
    Tensor &p = ps->Value(h);
    const Tensor &g = grads[h];
    FOCCE_CHECK(g.NumEl() == p.NumEl());
    for (int64_t i = 0; i < p.NumEl(); ++i) p[i] -= lr_ * g[i];
  }
}

void AdamOptimizer::Step(ParamSet *ps, const std::vector<Tensor> &grads) {
  FOCCE_CHECK(static_cast<int>(grads.size()) == ps->Size());
  if (m_.empty()) {
    for (int h = 0; h < ps->Size(); ++h) {
      m_.emplace_back(ps->Value(h).Shape());
      v_.emplace_back(ps->Value(h).Shape());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (int h = 0; h < ps->Size(); ++h) {
    Tensor &p = ps->Value(h);
    const Tensor &g = grads[h];
    FOCCE_CHECK(g.NumEl() == p.NumEl());
    for (int64_t i = 0; i < p.NumEl(); ++i) {
      m_[h][i] = b1_ * m_[h][i] + (1.0 - b1_) * g[i];
      v_[h][i] = b2_ * v_[h][i] + (1.0 - b2_) * g[i] * g[i];
      double mhat = m_[h][i] / bc1;
      double vhat = v_[h][i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace focce
