// focce/transducer_net.cc
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

#include "focce/transducer_net.h"

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

}  // namespace

TransducerNet::TransducerNet(const TransducerConfig &cfg, ParamSet *params,
                             const std::string &prefix, Rng &rng)
    : cfg_(cfg),
      encoder_({cfg.stack * cfg.feature_dim, cfg.encoder_dim,
                cfg.encoder_layers, cfg.kernel},
               params, prefix + ".enc", rng) {
  FOCCE_CHECK_MSG(cfg.vocab >= 1 && cfg.context >= 1 && cfg.embed_dim >= 1 &&
                      cfg.predictor_dim >= 1 && cfg.joiner_dim >= 1,
                  "bad transducer config");
  int V = cfg.vocab;
  embed_ = params->Add(prefix + ".pred.embed", DenseInit(rng, V + 1, cfg.embed_dim));
  w_pred_ = params->Add(prefix + ".pred.w",
                        DenseInit(rng, cfg.context * cfg.embed_dim, cfg.predictor_dim));
  b_pred_ = params->Add(prefix + ".pred.b", Tensor({cfg.predictor_dim}));
  w_enc_ = params->Add(prefix + ".join.w_f",
                       DenseInit(rng, cfg.encoder_dim, cfg.joiner_dim));
  w_g_ = params->Add(prefix + ".join.w_g",
                     DenseInit(rng, cfg.predictor_dim, cfg.joiner_dim));
  b_join_ = params->Add(prefix + ".join.b", Tensor({cfg.joiner_dim}));
  w_out_ = params->Add(prefix + ".join.w_out",
                       DenseInit(rng, cfg.joiner_dim, V + 1));
  b_out_ = params->Add(prefix + ".join.b_out", Tensor({V + 1}));
}

ad::Var TransducerNet::Encode(const Mounted &m, const Tensor &x,
                              const ContextSchedule &schedule) const {
  FOCCE_CHECK_MSG(x.Rank() == 2 && x.Dim(1) == cfg_.feature_dim,
                  "features must be [T_raw, feature_dim]");
  FOCCE_CHECK_MSG(NumSteps(x.Dim(0)) == schedule.T,
                  "schedule length does not match stacked input");
  Tensor stacked = StackFrames(x, cfg_.stack);
  return encoder_.Apply(m, m.tape->Constant(std::move(stacked)), schedule);
}

ad::Var TransducerNet::PredictTokens(const Mounted &m,
                                     const std::vector<int> &flat_tokens,
                                     int n) const {
  ad::Var rows = ad::Rows(m[embed_], flat_tokens);
  ad::Var flat = ad::Reshape(rows, {n, cfg_.context * cfg_.embed_dim});
  return ad::Tanh(
      ad::AddRowVector(ad::Matmul(flat, m[w_pred_]), m[b_pred_]));
}

ad::Var TransducerNet::Predict(const Mounted &m,
                               const std::vector<int> &target) const {
  int U = static_cast<int>(target.size());
  for (int label : target)
    FOCCE_CHECK_MSG(label >= 1 && label <= cfg_.vocab, "label out of range");
  // Context slot j of row u holds token y_{u-context+1+j}; indices < 1 pad
  // with the start token 0.
  std::vector<int> flat(static_cast<size_t>(U + 1) * cfg_.context, 0);
  for (int u = 0; u <= U; ++u) {
    for (int j = 0; j < cfg_.context; ++j) {
      int src = u - cfg_.context + 1 + j;
      if (src >= 1) flat[static_cast<size_t>(u) * cfg_.context + j] = target[src - 1];
    }
  }
  return PredictTokens(m, flat, U + 1);
}

ad::Var TransducerNet::Joint(const Mounted &m, ad::Var f, ad::Var g) const {
  int T = f.Value().Dim(0), N = g.Value().Dim(0);
  ad::Var joint = ad::OuterAdd(ad::Matmul(f, m[w_enc_]), ad::Matmul(g, m[w_g_]));
  ad::Var rows = ad::Reshape(joint, {T * N, cfg_.joiner_dim});
  ad::Var hid = ad::Tanh(ad::AddRowVector(rows, m[b_join_]));
  ad::Var logits = ad::AddRowVector(ad::Matmul(hid, m[w_out_]), m[b_out_]);
  return ad::LogSoftmaxRows(logits);
}

LocalProbTable TransducerNet::BuildProbTable(
    const Mounted &m, const Tensor &x, std::vector<int> target,
    const ContextSchedule &schedule) const {
  int T = schedule.T, U = static_cast<int>(target.size()), V = cfg_.vocab;
  ad::Var f = Encode(m, x, schedule);
  ad::Var g = Predict(m, target);
  ad::Var logp = Joint(m, f, g);  // [T*(U+1), V+1]
  std::vector<int> label_cols(V);
  for (int k = 0; k < V; ++k) label_cols[k] = k;
  ad::Var log_y = ad::Reshape(ad::Cols(logp, label_cols), {T, U + 1, V});
  ad::Var log_phi = ad::Reshape(ad::Cols(logp, {V}), {T, U + 1});
  return MakeLocalProbTable(log_phi, log_y, std::move(target));
}

Tensor TransducerNet::DecodeLogProbs(const ParamSet &ps, const Tensor &x,
                                     const ContextSchedule &schedule) const {
  ad::Tape tape;
  Mounted m = MountParams(tape, ps, /*requires_grad=*/false);
  ad::Var f = Encode(m, x, schedule);
  int V = cfg_.vocab;
  int N = 1;
  for (int j = 0; j < cfg_.context; ++j) N *= V + 1;
  // Key digits are big-endian: the most recent token is the last digit.
  std::vector<int> flat(static_cast<size_t>(N) * cfg_.context);
  for (int key = 0; key < N; ++key) {
    int rest = key;
    for (int j = cfg_.context - 1; j >= 0; --j) {
      flat[static_cast<size_t>(key) * cfg_.context + j] = rest % (V + 1);
      rest /= V + 1;
    }
  }
  ad::Var g = PredictTokens(m, flat, N);
  return Joint(m, f, g).Value();
}

}  // namespace focce
