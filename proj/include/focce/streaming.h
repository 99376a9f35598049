// focce/streaming.h
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

#ifndef FOCCE_STREAMING_H_
#define FOCCE_STREAMING_H_

#include <vector>

#include "focce/autodiff.h"
#include "focce/lattice.h"
#include "focce/tensor.h"

namespace focce {

// Frame visibility under chunked processing: frame t sees input up to
// e(t) = min(T, C ceil(t/C) + R). The boundary set collects the frames where
// the visible context is about to grow, i.e. t in [1,T) with e(t) < e(t+1).
struct ContextSchedule {
  int C = 0, R = 0, T = 0;
  std::vector<int> e;             // e[t-1] for t in [1,T]
  std::vector<uint8_t> boundary;  // boundary[t-1] = 1 iff e(t) < e(t+1)

  int E(int t) const { return e[static_cast<size_t>(t) - 1]; }
  bool IsBoundary(int t) const {
    return boundary[static_cast<size_t>(t) - 1] != 0;
  }
  std::vector<int> BoundaryFrames() const;
};

// e(t) for one frame; throws when t is out of [1,T] or C < 1 or R < 0.
int ContextEnd(int C, int R, int T, int t);

ContextSchedule MakeSchedule(int C, int R, int T);

// Causal-compensation weights in log-space. Off-boundary frames carry no
// entries at all, which realizes "log gamma = 0 exactly when e(t) = e(t+1)"
// structurally instead of by convention. Boundary rows live in a dense
// [B, U+1] block, B = number of boundary frames.
struct FoCCTable {
  int T = 0, U = 0;
  std::vector<int> boundary_frames;  // ascending
  std::vector<int> row_of_frame;     // size T+1, -1 off boundary
  ad::Var log_gamma_rows;            // [B, U+1]; unused when B = 0

  bool HasRow(int t) const { return row_of_frame[static_cast<size_t>(t)] >= 0; }
  int Row(int t) const { return row_of_frame[static_cast<size_t>(t)]; }
};

// Structural zero table (no boundary rows carry mass; equivalent to gamma=1
// everywhere).
FoCCTable ZeroFoCCTable(ad::Tape &tape, const ContextSchedule &schedule, int U);

// Builds a table from boundary rows already on the tape. rows must be
// [B, U+1] with B matching the schedule's boundary count.
FoCCTable MakeFoCCTable(const ContextSchedule &schedule, int U, ad::Var rows);

// Builds a table from a dense [T, U+1] tensor; entries off the boundary set
// must be exactly zero (this is the error path for inconsistent inputs).
FoCCTable MakeFoCCTableDense(ad::Tape &tape, const ContextSchedule &schedule,
                             int U, const Tensor &dense_log_gamma,
                             bool requires_grad = false);

// Deformed (naive streaming) likelihood: the conventional recursion run on a
// causally-produced table. Identical computation to Likelihood; kept as a
// named quantity so baselines are logged under their own name.
ad::Var DeformedLikelihood(const LocalProbTable &probs);

// Modified recursion: the horizontal blank transition picks up the
// compensation weight of its source frame,
//   alpha(t,u) = alpha(t-1,u) phi(t-1,u) gamma(t-1,u) + alpha(t,u-1) Y(...).
// With detach_focc set, gamma enters through a stop-gradient and receives
// exactly zero gradient.
ForwardTable ModifiedForward(const LocalProbTable &probs,
                             const ContextSchedule &schedule,
                             const FoCCTable &focc, bool detach_focc);

ad::Var ModifiedLikelihood(const LocalProbTable &probs,
                           const ContextSchedule &schedule,
                           const FoCCTable &focc, bool detach_focc);

// Brute-force reference for the modified recursion: path enumeration where
// every rightward step out of (t,u) additionally multiplies gamma(t,u).
// dense_log_gamma is [T, U+1] with zeros off the boundary set.
double OracleEnumerateWeighted(const Tensor &log_phi, const Tensor &log_y,
                               const std::vector<int> &target,
                               const Tensor &dense_log_gamma);

}  // namespace focce

#endif  // FOCCE_STREAMING_H_
