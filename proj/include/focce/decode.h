// focce/decode.h
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

#ifndef FOCCE_DECODE_H_
#define FOCCE_DECODE_H_

#include <vector>

#include "focce/streaming.h"
#include "focce/tensor.h"
#include "focce/transducer_net.h"

namespace focce {

// Value-level joiner outputs for every (frame, predictor context), enough to
// rescore any prefix. The context key packs the last `context` tokens in
// base V+1, most recent token in the least significant digit; the start
// state is key 0 (all padding).
struct DecodeTable {
  int T = 0, V = 0, context = 0;
  Tensor logp;  // [T * N, V+1]

  int N() const {
    int n = 1;
    for (int j = 0; j < context; ++j) n *= V + 1;
    return n;
  }
  int NextKey(int key, int label) const {
    int high = N() / (V + 1);
    return key % high * (V + 1) + label;
  }
  double LogBlank(int t, int key) const {
    return logp[(static_cast<int64_t>(t - 1) * N() + key) * (V + 1) + V];
  }
  double LogLabel(int t, int key, int label) const {
    return logp[(static_cast<int64_t>(t - 1) * N() + key) * (V + 1) + label - 1];
  }
};

DecodeTable MakeDecodeTable(const TransducerNet &net, const ParamSet &ps,
                            const Tensor &x, const ContextSchedule &schedule);

// Frame-synchronous greedy: at each frame emit labels while the best label
// outcome beats blank, at most max_symbols per frame, then advance.
std::vector<int> GreedyDecode(const DecodeTable &table,
                              int max_symbols_per_frame = 3);

// Exact alignment-summed log-likelihood of a label sequence under the
// table, via the forward recursion over (frame, emitted-prefix length).
// No per-frame symbol cap; every frame consumes exactly one blank.
double RescoreSequence(const DecodeTable &table, const std::vector<int> &y);

// Beam search over label prefixes with per-frame expansion rounds. Each
// round ranks blank-ended and label-extended candidates together and keeps
// the best `beam`; identical prefixes merge by summing path probabilities.
// Pruning can drop part of a surviving prefix's alignment mass, so the
// final frontier, together with the greedy sequence when it fits max_len,
// is rescored with RescoreSequence and the best exact score wins. Widening
// the beam therefore never returns a sequence the model scores below the
// greedy one. beam = 1 reproduces GreedyDecode exactly. max_len < 0 means
// no explicit cap beyond T * max_symbols_per_frame.
std::vector<int> BeamDecode(const DecodeTable &table, int beam,
                            int max_symbols_per_frame = 3, int max_len = -1);

// Exact MAP by scoring every label sequence of length <= max_len through the
// forward recursion. Guarded to small search spaces.
std::vector<int> EnumerateMap(const TransducerNet &net, const ParamSet &ps,
                              const Tensor &x, const ContextSchedule &schedule,
                              int max_len);

// Levenshtein distance over tokens.
int64_t EditDistance(const std::vector<int> &hyp, const std::vector<int> &ref);

// Levenshtein distance over tokens divided by the reference length (by
// max(1, |ref|) so an empty reference stays finite).
double TokenErrorRate(const std::vector<int> &hyp, const std::vector<int> &ref);

}  // namespace focce

#endif  // FOCCE_DECODE_H_
