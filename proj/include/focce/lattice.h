// focce/lattice.h
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

#ifndef FOCCE_LATTICE_H_
#define FOCCE_LATTICE_H_

#include <vector>

#include "focce/autodiff.h"
#include "focce/tensor.h"

namespace focce {

// Per-cell local log-probabilities over the (time x target) alignment
// lattice. Frames t are 1-based in [1,T]; target positions u in [0,U].
//   log_phi: [T, U+1]     log blank probability at (t,u)
//   log_y:   [T, U+1, V]  log label probabilities at (t,u)
// target holds y_1..y_U with labels in [1,V]; y_0 is the implicit
// start-of-sequence and is never stored.
struct LocalProbTable {
  int T = 0, U = 0, V = 0;
  ad::Var log_phi;
  ad::Var log_y;
  std::vector<int> target;

  int64_t PhiIdx(int t, int u) const {
    return static_cast<int64_t>(t - 1) * (U + 1) + u;
  }
  int64_t YIdx(int t, int u, int label) const {
    return (static_cast<int64_t>(t - 1) * (U + 1) + u) * V + (label - 1);
  }
};

// Shape/label checks always run; when validate_normalization is set the
// local distributions must satisfy exp(log_phi) + sum_v exp(log_y) = 1
// within 1e-9 at every cell.
LocalProbTable MakeLocalProbTable(ad::Var log_phi, ad::Var log_y,
                                  std::vector<int> target,
                                  bool validate_normalization = false);

// Forward variables log alpha(t,u) for t in [0,T], u in [0,U]. alpha(1,0)=1;
// alpha(0,u)=0 and alpha(t,-1)=0 are the conventional boundaries.
struct ForwardTable {
  int T = 0, U = 0;
  std::vector<ad::Var> log_alpha;  // (T+1)*(U+1), row-major in (t,u)

  const ad::Var &Alpha(int t, int u) const {
    return log_alpha[static_cast<size_t>(t) * (U + 1) + u];
  }
  // Snapshot of the current values, shape [T+1, U+1].
  Tensor Values() const;
};

// Two-term recursion: alpha(t,u) = alpha(t-1,u) phi(t-1,u)
//                               + alpha(t,u-1) Y(t,u-1,y_u), in log-space.
ForwardTable ForwardAlpha(const LocalProbTable &probs);

// log alpha(T,U) + log phi(T,U).
ad::Var Likelihood(const LocalProbTable &probs);
ad::Var LikelihoodFromTable(const LocalProbTable &probs,
                            const ForwardTable &table);

// Brute-force reference: enumerates every monotone path from (1,0) to (T,U),
// multiplying phi at rightward steps, Y(.,.,y_{u+1}) at upward steps, and the
// final phi(T,U). Works on plain values in linear space (sizes are guarded),
// returns the log of the path sum. Throws when C(T-1+U, U) > 10^6.
double OracleEnumerate(const Tensor &log_phi, const Tensor &log_y,
                       const std::vector<int> &target);

// Number of monotone paths, C(T-1+U, U), as a double (guard arithmetic).
double LatticePathCount(int T, int U);

}  // namespace focce

#endif  // FOCCE_LATTICE_H_
