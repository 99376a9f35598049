// focce/flow.cc
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

#include "focce/flow.h"

#include <cmath>

#include "focce/common.h"

namespace focce {

namespace {

Tensor RandomInit(Rng &rng, int rows, int cols) {
  Tensor w({rows, cols});
  double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (int64_t i = 0; i < w.NumEl(); ++i) w[i] = scale * rng.Normal();
  return w;
}

}  // namespace

Maf::Maf(const FlowConfig &cfg, ParamSet *params, const std::string &prefix,
         Rng &rng)
    : cfg_(cfg) {
  FOCCE_CHECK_MSG(cfg_.dim >= 1 && cfg_.hidden >= 1 && cfg_.depth >= 1 &&
                      cfg_.blocks >= 1 && cfg_.cond_dim >= 0,
                  "flow configuration");
  const int d = cfg_.dim, h = cfg_.hidden, c = cfg_.cond_dim;

  // MADE degrees: input dim i carries degree i (1-based); condition inputs
  // carry degree 0 and connect everywhere. Hidden units cycle through
  // [1, d-1] unconditionally. With conditioning, the first half of the
  // hidden units form a degree-0 trunk: they see only the condition, feed
  // every output, and are the sole nonlinear path into the first dimension's
  // mu and s. Cycling the trunk with the other degrees instead would leave
  // h / (2d) units for the whole conditional map, which starves it.
  std::vector<int> deg(h, 0);
  if (d >= 2) {
    int trunk = c > 0 ? h / 2 : 0;
    for (int j = trunk; j < h; ++j) deg[j] = 1 + ((j - trunk) % (d - 1));
  }
  mask_in_ = Tensor({d + c, h});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < h; ++j) mask_in_.At(i, j) = deg[j] >= i + 1 ? 1.0 : 0.0;
  for (int i = d; i < d + c; ++i)
    for (int j = 0; j < h; ++j) mask_in_.At(i, j) = 1.0;
  mask_hh_ = Tensor({h, h});
  for (int j = 0; j < h; ++j)
    for (int k = 0; k < h; ++k) mask_hh_.At(j, k) = deg[k] >= deg[j] ? 1.0 : 0.0;
  mask_out_ = Tensor({h, 2 * d});
  for (int j = 0; j < h; ++j)
    for (int o = 0; o < 2 * d; ++o) {
      int outdim = o % d;  // shift block then log-scale block
      mask_out_.At(j, o) = deg[j] <= outdim ? 1.0 : 0.0;
    }

  reverse_.resize(d);
  for (int i = 0; i < d; ++i) reverse_[i] = d - 1 - i;

  for (int l = 0; l < cfg_.depth; ++l) {
    LayerParams lp;
    std::string base = prefix + ".layer" + std::to_string(l);
    lp.w_in = params->Add(base + ".w_in", RandomInit(rng, d + c, h));
    lp.b_in = params->Add(base + ".b_in", Tensor({h}));
    for (int b = 1; b < cfg_.blocks; ++b) {
      lp.w_hh.push_back(params->Add(base + ".w_h" + std::to_string(b),
                                    RandomInit(rng, h, h)));
      lp.b_hh.push_back(params->Add(base + ".b_h" + std::to_string(b),
                                    Tensor({h})));
    }
    // Zero final layer: the flow starts as the identity map.
    lp.w_out = params->Add(base + ".w_out", Tensor({h, 2 * d}));
    lp.b_out = params->Add(base + ".b_out", Tensor({2 * d}));
    // Condition inputs have degree 0, so a direct skip into every output is
    // mask-legal. It gives every dimension a linear-in-condition term that
    // does not have to be routed through the trunk. Zero-initialized to keep
    // the identity start.
    if (c > 0) lp.w_cond = params->Add(base + ".w_cond", Tensor({c, 2 * d}));
    layers_.push_back(lp);
  }
}

ad::Var Maf::LogDensityRows(const Mounted &m, ad::Var v, ad::Var cond,
                            const Tensor *mask) const {
  ad::Tape &tape = *m.tape;
  const int d = cfg_.dim, c = cfg_.cond_dim;
  const Tensor &vv = v.Value();
  FOCCE_CHECK_MSG(vv.Rank() == 2 && vv.Dim(1) == d, "flow input shape");
  const int n = vv.Dim(0);
  if (c > 0) {
    FOCCE_CHECK_MSG(cond.Valid() && cond.Value().Rank() == 2 &&
                        cond.Value().Dim(0) == n && cond.Value().Dim(1) == c,
                    "flow condition shape");
  }
  if (mask != nullptr) {
    FOCCE_CHECK_MSG(cfg_.depth == 1, "masked density requires depth 1");
    FOCCE_CHECK_MSG(mask->Rank() == 2 && mask->Dim(0) == n && mask->Dim(1) == d,
                    "flow mask shape");
  }

  ad::Var mask_var;
  if (mask != nullptr) mask_var = tape.Constant(*mask);
  auto masked = [&](ad::Var x) {
    return mask == nullptr ? x : ad::Mul(x, mask_var);
  };

  ad::Var min = tape.Constant(mask_in_);
  ad::Var mhh = tape.Constant(mask_hh_);
  ad::Var mout = tape.Constant(mask_out_);

  std::vector<int> mu_cols(d), s_cols(d), rev = reverse_;
  for (int i = 0; i < d; ++i) {
    mu_cols[i] = i;
    s_cols[i] = d + i;
  }

  ad::Var total = tape.Constant(Tensor({n}));
  ad::Var cur = v;
  for (int l = 0; l < cfg_.depth; ++l) {
    const LayerParams &lp = layers_[l];
    ad::Var inp = c > 0 ? ad::ConcatCols(cur, cond) : cur;
    ad::Var hid = ad::Tanh(
        ad::AddRowVector(ad::Matmul(inp, ad::Mul(m[lp.w_in], min)), m[lp.b_in]));
    for (size_t b = 0; b < lp.w_hh.size(); ++b) {
      hid = ad::Tanh(ad::AddRowVector(
          ad::Matmul(hid, ad::Mul(m[lp.w_hh[b]], mhh)), m[lp.b_hh[b]]));
    }
    ad::Var out = ad::AddRowVector(ad::Matmul(hid, ad::Mul(m[lp.w_out], mout)),
                                   m[lp.b_out]);
    if (c > 0) out = ad::Add(out, ad::Matmul(cond, m[lp.w_cond]));
    ad::Var mu = ad::Cols(out, mu_cols);
    ad::Var s = ad::Cols(out, s_cols);
    ad::Var z = ad::Mul(cur - mu, ad::Exp(ad::Neg(s)));
    total = total + ad::RowSum(masked(ad::Neg(s)));
    cur = (l + 1 < cfg_.depth) ? ad::Cols(z, rev) : z;
  }
  // Prior term on the final z.
  ad::Var prior = ad::AddConst(ad::Scale(ad::Mul(cur, cur), -0.5),
                               -0.5 * kLog2Pi);
  total = total + ad::RowSum(masked(prior));
  return total;  // [n]
}

void Maf::CondEval(const ParamSet &ps, const LayerParams &lp, const double *cur,
                   const double *cond, std::vector<double> *mu,
                   std::vector<double> *s) const {
  const int d = cfg_.dim, c = cfg_.cond_dim, h = cfg_.hidden;
  std::vector<double> act(h, 0.0), next(h);
  const Tensor &win = ps.Value(lp.w_in);
  const Tensor &bin = ps.Value(lp.b_in);
  for (int j = 0; j < h; ++j) {
    double a = bin[j];
    for (int i = 0; i < d; ++i)
      if (mask_in_.At(i, j) != 0.0) a += cur[i] * win.At(i, j);
    for (int i = 0; i < c; ++i) a += cond[i] * win.At(d + i, j);
    act[j] = std::tanh(a);
  }
  for (size_t b = 0; b < lp.w_hh.size(); ++b) {
    const Tensor &w = ps.Value(lp.w_hh[b]);
    const Tensor &bb = ps.Value(lp.b_hh[b]);
    for (int k = 0; k < h; ++k) {
      double a = bb[k];
      for (int j = 0; j < h; ++j)
        if (mask_hh_.At(j, k) != 0.0) a += act[j] * w.At(j, k);
      next[k] = std::tanh(a);
    }
    act.swap(next);
  }
  const Tensor &wout = ps.Value(lp.w_out);
  const Tensor &bout = ps.Value(lp.b_out);
  mu->assign(d, 0.0);
  s->assign(d, 0.0);
  for (int o = 0; o < 2 * d; ++o) {
    double a = bout[o];
    for (int j = 0; j < h; ++j)
      if (mask_out_.At(j, o) != 0.0) a += act[j] * wout.At(j, o);
    if (c > 0) {
      const Tensor &wc = ps.Value(lp.w_cond);
      for (int i = 0; i < c; ++i) a += cond[i] * wc.At(i, o);
    }
    if (o < d)
      (*mu)[o] = a;
    else
      (*s)[o - d] = a;
  }
}

Maf::ForwardResult Maf::ForwardValues(const ParamSet &ps, const Tensor &v,
                                      const Tensor &cond) const {
  const int d = cfg_.dim;
  FOCCE_CHECK_MSG(v.NumEl() == d, "flow input size");
  if (cfg_.cond_dim > 0)
    FOCCE_CHECK_MSG(cond.NumEl() == cfg_.cond_dim, "flow condition size");
  std::vector<double> cur(v.Data(), v.Data() + d);
  std::vector<double> mu, s;
  double log_det = 0.0;
  for (int l = 0; l < cfg_.depth; ++l) {
    CondEval(ps, layers_[l], cur.data(), cond.Data(), &mu, &s);
    std::vector<double> z(d);
    for (int i = 0; i < d; ++i) {
      z[i] = (cur[i] - mu[i]) * std::exp(-s[i]);
      log_det -= s[i];
    }
    if (l + 1 < cfg_.depth) {
      for (int i = 0; i < d; ++i) cur[i] = z[reverse_[i]];
    } else {
      cur = z;
    }
  }
  ForwardResult r;
  r.z = Tensor({d});
  for (int i = 0; i < d; ++i) r.z[i] = cur[i];
  r.log_det = log_det;
  return r;
}

double Maf::LogDensityValue(const ParamSet &ps, const Tensor &v,
                            const Tensor &cond) const {
  ForwardResult r = ForwardValues(ps, v, cond);
  double lp = r.log_det;
  for (int i = 0; i < cfg_.dim; ++i)
    lp += -0.5 * r.z[i] * r.z[i] - 0.5 * kLog2Pi;
  return lp;
}

Tensor Maf::Inverse(const ParamSet &ps, const Tensor &z,
                    const Tensor &cond) const {
  const int d = cfg_.dim;
  FOCCE_CHECK_MSG(z.NumEl() == d, "flow input size");
  std::vector<double> zl(d), cur(z.Data(), z.Data() + d);
  std::vector<double> mu, s;
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    if (l + 1 < cfg_.depth) {
      // Undo the reversal that fed layer l+1 (it is its own inverse).
      for (int i = 0; i < d; ++i) zl[i] = cur[reverse_[i]];
    } else {
      zl = cur;
    }
    // Sequential inversion in the natural order: dimension i only needs the
    // already-recovered dimensions before it.
    std::vector<double> vrec(d, 0.0);
    for (int i = 0; i < d; ++i) {
      CondEval(ps, layers_[l], vrec.data(), cond.Data(), &mu, &s);
      vrec[i] = zl[i] * std::exp(s[i]) + mu[i];
    }
    cur = vrec;
  }
  Tensor out({d});
  for (int i = 0; i < d; ++i) out[i] = cur[i];
  return out;
}

}  // namespace focce
