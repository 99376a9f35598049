// focce/transducer_net.h
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

#ifndef FOCCE_TRANSDUCER_NET_H_
#define FOCCE_TRANSDUCER_NET_H_

#include <string>
#include <vector>

#include "focce/encoder.h"
#include "focce/lattice.h"
#include "focce/params.h"
#include "focce/rng.h"
#include "focce/streaming.h"

namespace focce {

// Toy streaming transducer: chunk-causal conv encoder, stateless fixed-context
// predictor, additive joiner with log-softmax over V labels plus blank.
// Labels are 1..V; token 0 is the start-of-sequence / context padding. In
// joiner output rows, column k-1 holds label k and column V holds blank.
struct TransducerConfig {
  int feature_dim = 2;
  int stack = 1;  // raw frames per encoder step
  int encoder_dim = 16;
  int encoder_layers = 2;
  int kernel = 3;
  int vocab = 8;    // V
  int context = 2;  // predictor context length
  int embed_dim = 8;
  int predictor_dim = 16;
  int joiner_dim = 16;
};

class TransducerNet {
 public:
  TransducerNet(const TransducerConfig &cfg, ParamSet *params,
                const std::string &prefix, Rng &rng);

  const TransducerConfig &Config() const { return cfg_; }

  // Encoder steps for a raw feature length (ceil division by stack).
  int NumSteps(int raw_frames) const {
    return (raw_frames + cfg_.stack - 1) / cfg_.stack;
  }

  // x: [T_raw, feature_dim]; schedule.T must equal NumSteps(T_raw).
  // Returns [T, encoder_dim].
  ad::Var Encode(const Mounted &m, const Tensor &x,
                 const ContextSchedule &schedule) const;

  // Stateless predictor over y_0..y_U (y_0 = start token, implicit).
  // Row u depends only on the last `context` tokens of the prefix.
  // Returns [U+1, predictor_dim].
  ad::Var Predict(const Mounted &m, const std::vector<int> &target) const;

  // Full local probability table for one utterance. Differentiable wrt
  // every mounted parameter.
  LocalProbTable BuildProbTable(const Mounted &m, const Tensor &x,
                                std::vector<int> target,
                                const ContextSchedule &schedule) const;

  // Value-only log-probs for decoding: one row per (frame, predictor
  // context), laid out as [T * N, V+1] with N = (V+1)^context and context key
  // sum_j token_j * (V+1)^(context-1-j) over the last `context` tokens
  // (padded with 0 on the left). Row index = (t-1)*N + key.
  Tensor DecodeLogProbs(const ParamSet &ps, const Tensor &x,
                        const ContextSchedule &schedule) const;

 private:
  // f: [T, encoder_dim], g: [N, predictor_dim] -> log-softmax [T*N, V+1].
  ad::Var Joint(const Mounted &m, ad::Var f, ad::Var g) const;
  // Embeds context token rows: flat_tokens has n*context entries.
  ad::Var PredictTokens(const Mounted &m, const std::vector<int> &flat_tokens,
                        int n) const;

  TransducerConfig cfg_;
  ChunkEncoder encoder_;
  int embed_ = -1, w_pred_ = -1, b_pred_ = -1;
  int w_enc_ = -1, w_g_ = -1, b_join_ = -1, w_out_ = -1, b_out_ = -1;
};

}  // namespace focce

#endif  // FOCCE_TRANSDUCER_NET_H_
