// focce/focce_net.h
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

#ifndef FOCCE_FOCCE_NET_H_
#define FOCCE_FOCCE_NET_H_

#include <memory>
#include <string>
#include <vector>

#include "focce/encoder.h"
#include "focce/flow.h"
#include "focce/params.h"
#include "focce/rng.h"
#include "focce/streaming.h"

namespace focce {

// Causal-compensation estimator: a chunk-causal encoder over the same
// features as the transducer, an LSTM over the label prefix, and a
// conditional masked autoregressive flow over the next-chunk features.
//   chi(t,u)   = flow density of the next chunk given [f_t; g_u]
//   chi_bar(t) = flow density of the next chunk given [f_t; 0]
//   log gamma(t,u) = lambda_gamma * (log chi(t,u) - log chi_bar(t))
// The flow models the flattened next chunk: chunk * stack * feature_dim
// values in time order; a ragged final chunk is zero padded and masked out
// of the density.
struct FoCCENetConfig {
  double lambda_gamma = 0.05;
  int feature_dim = 2;
  int stack = 1;
  int chunk = 4;  // C; schedules used with this net must match
  int encoder_dim = 12;
  int encoder_layers = 2;
  int kernel = 3;
  int vocab = 8;
  int embed_dim = 8;
  int predictor_dim = 12;  // LSTM width
  int flow_hidden = 24;
  int flow_depth = 1;
  int flow_blocks = 2;
  bool literal_objective = false;  // sum raw densities instead of logs
};

class FoCCENet {
 public:
  FoCCENet(const FoCCENetConfig &cfg, ParamSet *params,
           const std::string &prefix, Rng &rng);

  const FoCCENetConfig &Config() const { return cfg_; }
  int FlowDim() const { return cfg_.chunk * cfg_.stack * cfg_.feature_dim; }
  int NumSteps(int raw_frames) const {
    return (raw_frames + cfg_.stack - 1) / cfg_.stack;
  }

  // x: [T_raw, feature_dim]; returns [T, encoder_dim], chunk-causal.
  ad::Var Encode(const Mounted &m, const Tensor &x,
                 const ContextSchedule &schedule) const;

  // LSTM over y_0..y_U (y_0 = start token). Returns [U+1, predictor_dim];
  // row u depends only on y_{0:u}.
  ad::Var Predict(const Mounted &m, const std::vector<int> &target) const;

  // Flattened next-chunk targets per boundary frame, both [B, FlowDim()].
  // any_padding reports whether some row has masked (padded) components.
  void ChunkTargets(const Tensor &x, const ContextSchedule &schedule,
                    Tensor *v, Tensor *mask, bool *any_padding) const;

  // Log-densities per boundary frame. When the boundary set is empty the
  // Vars are left invalid and downstream quantities degenerate to zero.
  struct Densities {
    std::vector<int> boundary_frames;
    ad::Var log_chi_bar;  // [B]
    ad::Var log_chi;      // [B, U+1]
  };
  Densities ChiDensities(const Mounted &m, const Tensor &x,
                         const std::vector<int> &target,
                         const ContextSchedule &schedule) const;

  // lambda_gamma * (log chi - log chi_bar) as boundary rows.
  FoCCTable BuildGamma(const Mounted &m, const Densities &d,
                       const ContextSchedule &schedule, int U) const;

  // Per-utterance estimator objective over boundary frames: by default
  // sum_t [log chi_bar(t) + (1/U) sum_{u=1..U} log chi(t,u)]; the literal
  // mode sums the raw densities instead. U = 0 drops the inner average;
  // an empty boundary set gives a constant zero.
  ad::Var Objective(const Mounted &m, const Densities &d, int U) const;

 private:
  FoCCENetConfig cfg_;
  ChunkEncoder encoder_;
  std::unique_ptr<Maf> flow_;
  int embed_ = -1, w_ih_ = -1, w_hh_ = -1, b_lstm_ = -1;
};

}  // namespace focce

#endif  // FOCCE_FOCCE_NET_H_
