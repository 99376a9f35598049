// focce/focce_net.cc
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

#include "focce/focce_net.h"

#include <cmath>
#include <utility>

#include "focce/common.h"

namespace focce {

namespace {

Tensor DenseInit(Rng &rng, int rows, int cols) {
  Tensor w({rows, cols});
  double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (int64_t i = 0; i < w.NumEl(); ++i) w[i] = scale * rng.Normal();
  return w;
}

std::vector<int> Span(int lo, int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + i;
  return v;
}

}  // namespace

FoCCENet::FoCCENet(const FoCCENetConfig &cfg, ParamSet *params,
                   const std::string &prefix, Rng &rng)
    : cfg_(cfg),
      encoder_({cfg.stack * cfg.feature_dim, cfg.encoder_dim,
                cfg.encoder_layers, cfg.kernel},
               params, prefix + ".enc", rng) {
  FOCCE_CHECK_MSG(cfg.lambda_gamma >= 0.0, "lambda_gamma must be >= 0");
  FOCCE_CHECK_MSG(cfg.stack >= 1 && cfg.chunk >= 1 && cfg.vocab >= 1 &&
                      cfg.predictor_dim >= 1 && cfg.flow_depth >= 1,
                  "bad estimator config");
  int V = cfg.vocab, H = cfg.predictor_dim;
  embed_ = params->Add(prefix + ".pred.embed", DenseInit(rng, V + 1, cfg.embed_dim));
  w_ih_ = params->Add(prefix + ".pred.w_ih", DenseInit(rng, cfg.embed_dim, 4 * H));
  w_hh_ = params->Add(prefix + ".pred.w_hh", DenseInit(rng, H, 4 * H));
  b_lstm_ = params->Add(prefix + ".pred.b", Tensor({4 * H}));
  FlowConfig fc;
  fc.dim = FlowDim();
  fc.cond_dim = cfg.encoder_dim + H;
  fc.hidden = cfg.flow_hidden;
  fc.depth = cfg.flow_depth;
  fc.blocks = cfg.flow_blocks;
  flow_ = std::make_unique<Maf>(fc, params, prefix + ".flow", rng);
}

ad::Var FoCCENet::Encode(const Mounted &m, const Tensor &x,
                         const ContextSchedule &schedule) const {
  FOCCE_CHECK_MSG(x.Rank() == 2 && x.Dim(1) == cfg_.feature_dim,
                  "features must be [T_raw, feature_dim]");
  FOCCE_CHECK_MSG(NumSteps(x.Dim(0)) == schedule.T,
                  "schedule length does not match stacked input");
  FOCCE_CHECK_MSG(schedule.C == cfg_.chunk,
                  "schedule chunk size does not match the flow dimension");
  Tensor stacked = StackFrames(x, cfg_.stack);
  return encoder_.Apply(m, m.tape->Constant(std::move(stacked)), schedule);
}

ad::Var FoCCENet::Predict(const Mounted &m,
                          const std::vector<int> &target) const {
  int U = static_cast<int>(target.size());
  int H = cfg_.predictor_dim;
  for (int label : target)
    FOCCE_CHECK_MSG(label >= 1 && label <= cfg_.vocab, "label out of range");
  ad::Tape &tape = *m.tape;
  ad::Var h = tape.Constant(Tensor({1, H}));
  ad::Var c = tape.Constant(Tensor({1, H}));
  std::vector<ad::Var> outs;
  outs.reserve(U + 1);
  for (int u = 0; u <= U; ++u) {
    int token = u == 0 ? 0 : target[u - 1];
    ad::Var xin = ad::Rows(m[embed_], {token});
    ad::Var pre = ad::AddRowVector(
        ad::Add(ad::Matmul(xin, m[w_ih_]), ad::Matmul(h, m[w_hh_])),
        m[b_lstm_]);
    ad::Var gi = ad::Sigmoid(ad::Cols(pre, Span(0, H)));
    ad::Var gf = ad::Sigmoid(ad::Cols(pre, Span(H, H)));
    ad::Var gg = ad::Tanh(ad::Cols(pre, Span(2 * H, H)));
    ad::Var go = ad::Sigmoid(ad::Cols(pre, Span(3 * H, H)));
    c = ad::Add(ad::Mul(gf, c), ad::Mul(gi, gg));
    h = ad::Mul(go, ad::Tanh(c));
    outs.push_back(ad::Reshape(h, {H}));
  }
  return ad::StackRows(outs);
}

void FoCCENet::ChunkTargets(const Tensor &x, const ContextSchedule &schedule,
                            Tensor *v, Tensor *mask,
                            bool *any_padding) const {
  Tensor stacked = StackFrames(x, cfg_.stack);
  int sd = cfg_.stack * cfg_.feature_dim;
  int d = FlowDim();
  std::vector<int> bf = schedule.BoundaryFrames();
  int B = static_cast<int>(bf.size());
  FOCCE_CHECK_MSG(B > 0, "no boundary frames; no chunk targets exist");
  *v = Tensor({B, d});
  *mask = Tensor({B, d});
  *any_padding = false;
  for (int b = 0; b < B; ++b) {
    int t = bf[b];
    int lo = schedule.E(t), hi = schedule.E(t + 1);  // frames lo+1..hi
    int len = hi - lo;
    if (len < cfg_.chunk) *any_padding = true;
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < sd; ++j)
        v->At(b, i * sd + j) = stacked.At(lo + i, j);
    for (int i = 0; i < len * sd; ++i) mask->At(b, i) = 1.0;
  }
}

FoCCENet::Densities FoCCENet::ChiDensities(
    const Mounted &m, const Tensor &x, const std::vector<int> &target,
    const ContextSchedule &schedule) const {
  Densities out;
  out.boundary_frames = schedule.BoundaryFrames();
  int B = static_cast<int>(out.boundary_frames.size());
  if (B == 0) return out;
  ad::Tape &tape = *m.tape;
  int U = static_cast<int>(target.size());

  ad::Var f = Encode(m, x, schedule);
  std::vector<int> fidx(B);
  for (int b = 0; b < B; ++b) fidx[b] = out.boundary_frames[b] - 1;
  ad::Var fb = ad::Rows(f, fidx);  // [B, enc]

  Tensor v, mask;
  bool padded = false;
  ChunkTargets(x, schedule, &v, &mask, &padded);
  const Tensor *mask_ptr = padded ? &mask : nullptr;

  // Unconditional-on-targets case: an exact zero vector in the g slot.
  ad::Var zero_g = tape.Constant(Tensor({B, cfg_.predictor_dim}));
  out.log_chi_bar = flow_->LogDensityRows(
      m, tape.Constant(v), ad::ConcatCols(fb, zero_g), mask_ptr);

  ad::Var g = Predict(m, target);  // [U+1, H]
  int n = B * (U + 1);
  std::vector<int> fi(n), gi(n);
  Tensor v2({n, FlowDim()}), mask2({n, FlowDim()});
  for (int b = 0; b < B; ++b) {
    for (int u = 0; u <= U; ++u) {
      int r = b * (U + 1) + u;
      fi[r] = b;
      gi[r] = u;
      for (int j = 0; j < FlowDim(); ++j) {
        v2.At(r, j) = v.At(b, j);
        mask2.At(r, j) = mask.At(b, j);
      }
    }
  }
  ad::Var cond = ad::ConcatCols(ad::Rows(fb, fi), ad::Rows(g, gi));
  ad::Var chi_flat = flow_->LogDensityRows(m, tape.Constant(std::move(v2)),
                                           cond, padded ? &mask2 : nullptr);
  out.log_chi = ad::Reshape(chi_flat, {B, U + 1});
  return out;
}

FoCCTable FoCCENet::BuildGamma(const Mounted &m, const Densities &d,
                               const ContextSchedule &schedule, int U) const {
  if (d.boundary_frames.empty()) return ZeroFoCCTable(*m.tape, schedule, U);
  int B = static_cast<int>(d.boundary_frames.size());
  // Broadcast log chi_bar across the U+1 columns via a ones matmul.
  ad::Var bar_col = ad::Reshape(d.log_chi_bar, {B, 1});
  ad::Var ones = m.tape->Constant(
      Tensor({1, U + 1}, std::vector<double>(U + 1, 1.0)));
  ad::Var rows = ad::Scale(ad::Sub(d.log_chi, ad::Matmul(bar_col, ones)),
                           cfg_.lambda_gamma);
  return MakeFoCCTable(schedule, U, rows);
}

ad::Var FoCCENet::Objective(const Mounted &m, const Densities &d,
                            int U) const {
  if (d.boundary_frames.empty()) return m.tape->ConstantScalar(0.0);
  ad::Var bar = d.log_chi_bar;
  ad::Var chi = d.log_chi;
  if (cfg_.literal_objective) {
    bar = ad::Exp(bar);
    chi = ad::Exp(chi);
  }
  ad::Var total = ad::Sum(bar);
  if (U >= 1)
    total = ad::Add(total,
                    ad::Scale(ad::Sum(ad::Cols(chi, Span(1, U))), 1.0 / U));
  return total;
}

}  // namespace focce
