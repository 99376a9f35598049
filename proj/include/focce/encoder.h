// focce/encoder.h
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

#ifndef FOCCE_ENCODER_H_
#define FOCCE_ENCODER_H_

#include <string>
#include <vector>

#include "focce/autodiff.h"
#include "focce/params.h"
#include "focce/rng.h"
#include "focce/streaming.h"
#include "focce/tensor.h"

namespace focce {

// Subsampling by frame stacking: [T_raw, feat] -> [ceil(T_raw/stack),
// stack*feat]. A ragged tail is padded with zero frames.
Tensor StackFrames(const Tensor &x, int stack);

struct ChunkEncoderConfig {
  int in_dim = 1;
  int out_dim = 8;
  int layers = 2;
  int kernel = 3;  // taps reach kernel-1 frames to each side before clipping
};

// Stack of chunk-causal convolutions with tanh activations. The first layer
// sees input up to e(t); deeper layers see previous activations only up to
// the frame's chunk end (no right offset). Since e(.) is constant within a
// chunk, the composed receptive field of frame t never exceeds e(t) at any
// depth, which is the contract the causality probes check at the bit level.
class ChunkEncoder {
 public:
  ChunkEncoder(const ChunkEncoderConfig &cfg, ParamSet *params,
               const std::string &prefix, Rng &rng);

  const ChunkEncoderConfig &Config() const { return cfg_; }

  // x: [T, in_dim] with T == schedule.T. Returns [T, out_dim].
  ad::Var Apply(const Mounted &m, ad::Var x,
                const ContextSchedule &schedule) const;

 private:
  ChunkEncoderConfig cfg_;
  std::vector<int> w_, b_;  // parameter handles per layer
};

}  // namespace focce

#endif  // FOCCE_ENCODER_H_
