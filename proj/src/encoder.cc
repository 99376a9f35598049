// focce/encoder.cc
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

#include "focce/encoder.h"

#include <cmath>

#include "focce/common.h"

namespace focce {

Tensor StackFrames(const Tensor &x, int stack) {
  FOCCE_CHECK_MSG(x.Rank() == 2 && x.Dim(0) >= 1, "features must be [T, d]");
  FOCCE_CHECK_MSG(stack >= 1, "stack factor must be >= 1");
  int raw = x.Dim(0), d = x.Dim(1);
  int T = (raw + stack - 1) / stack;
  Tensor out({T, stack * d});
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < stack; ++s) {
      int r = t * stack + s;
      if (r >= raw) break;  // tail stays zero
      for (int j = 0; j < d; ++j) out.At(t, s * d + j) = x.At(r, j);
    }
  }
  return out;
}

namespace {

Tensor ConvInit(Rng &rng, int taps, int din, int dout) {
  Tensor w({taps, din, dout});
  double scale = 1.0 / std::sqrt(static_cast<double>(taps * din));
  for (int64_t i = 0; i < w.NumEl(); ++i) w[i] = scale * rng.Normal();
  return w;
}

}  // namespace

ChunkEncoder::ChunkEncoder(const ChunkEncoderConfig &cfg, ParamSet *params,
                           const std::string &prefix, Rng &rng)
    : cfg_(cfg) {
  FOCCE_CHECK_MSG(cfg.in_dim >= 1 && cfg.out_dim >= 1 && cfg.layers >= 1 &&
                      cfg.kernel >= 1,
                  "bad encoder config");
  int taps = 2 * cfg.kernel - 1;
  for (int l = 0; l < cfg.layers; ++l) {
    int din = l == 0 ? cfg.in_dim : cfg.out_dim;
    std::string base = prefix + ".conv" + std::to_string(l);
    w_.push_back(params->Add(base + ".w", ConvInit(rng, taps, din, cfg.out_dim)));
    b_.push_back(params->Add(base + ".b", Tensor({cfg.out_dim})));
  }
}

ad::Var ChunkEncoder::Apply(const Mounted &m, ad::Var x,
                            const ContextSchedule &schedule) const {
  const Tensor &xv = x.Value();
  FOCCE_CHECK_MSG(xv.Rank() == 2 && xv.Dim(0) == schedule.T &&
                      xv.Dim(1) == cfg_.in_dim,
                  "encoder input is " + xv.ShapeString() + ", schedule T=" +
                      std::to_string(schedule.T));
  int T = schedule.T;
  // ChunkConv window ends are 0-based indices.
  std::vector<int> first_end(T), chunk_end(T);
  for (int t = 1; t <= T; ++t) {
    first_end[t - 1] = schedule.E(t) - 1;
    int ce = schedule.C * ((t + schedule.C - 1) / schedule.C);
    chunk_end[t - 1] = std::min(T, ce) - 1;
  }
  ad::Var cur = x;
  int back = cfg_.kernel - 1, fwd = cfg_.kernel - 1;
  for (size_t l = 0; l < w_.size(); ++l) {
    const std::vector<int> &win = l == 0 ? first_end : chunk_end;
    cur = ad::Tanh(ad::ChunkConv(cur, m[w_[l]], m[b_[l]], back, fwd, win));
  }
  return cur;
}

}  // namespace focce
