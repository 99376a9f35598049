// focce/synth.h
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

#ifndef FOCCE_SYNTH_H_
#define FOCCE_SYNTH_H_

#include <cstdint>
#include <vector>

#include "focce/rng.h"
#include "focce/tensor.h"

namespace focce {

// Synthetic streaming-sensitive task. Each utterance is background noise
// plus label events aligned to chunk starts. An event writes a marker over
// frames [p, p+horizon) and a single closing frame at p+horizon whose
// direction on the closing plane encodes the label. The marker echoes the
// PREVIOUS event's label on the marker plane, the way an acoustic onset
// carries over from the word before it; the first event echoes a fixed
// utterance-start direction. A label is therefore a fixed function of
// frames [p, p+horizon] and becomes identifiable exactly when its closing
// frame is visible. With horizon = chunk * stack that frame is the first
// frame of the chunk after the marker, which a causal encoder at the chunk
// boundary has not seen: that is the ambiguity causal-compensation training
// is meant to exploit. The echo also makes one coming chunk predictable
// from the label prefix alone wherever it is not predictable from the
// audio: with events at least three chunks apart the previous closing has
// left a short convolutional receptive field by the boundary before the
// next marker, so a prefix-conditioned density model that has emitted the
// last label can predict that marker while an unconditioned one cannot.
struct TaskSpec {
  int vocab = 8;
  int feature_dim = 2;  // >= 2; identity directions live on a circle
  int min_len = 32, max_len = 64;  // raw frame range, inclusive
  int chunk = 4;                   // C, in encoder steps
  int right = 0;                   // R
  int stack = 1;                   // raw frames per encoder step
  int horizon = 4;                 // h, in raw frames
  double noise = 0.1;
  double emit_rate = 0.125;        // approximate labels per frame
};

struct Utterance {
  Tensor x;            // [T_raw, feature_dim]
  std::vector<int> y;  // labels in [1, vocab]
};

struct Event {
  int pos;  // 1-based raw frame where the marker starts; pos == 1 mod chunk
  int label;
};

// Marker row echoing prev_label in [0, vocab], where 0 is the fixed
// utterance-start direction half a grid step off every label direction.
// The marker plane is dims (2, 3) when the feature dim allows, else the
// closing plane.
Tensor MarkerRow(const TaskSpec &spec, int prev_label);

// Closing row for label k in [1, vocab]: evenly spaced directions on the
// (0, 1) feature plane, so the Bayes margin is a function of the vocabulary
// size instead of the luck of a random draw.
Tensor ClosingRow(const TaskSpec &spec, int label);

// One utterance; every event's closing frame fits inside the sequence and at
// least one event is always present.
Utterance SynthUtterance(const TaskSpec &spec, Rng &rng,
                         std::vector<Event> *events = nullptr);

std::vector<Utterance> SynthGenerate(const TaskSpec &spec, int n,
                                     uint64_t seed);

// Matched-filter classification of event labels, the Bayes rule under the
// Gaussian noise model. "full" sees the whole pattern; "streaming_greedy"
// decides at the event frame and sees only frames up to e(event frame).
struct BayesAccuracy {
  double full = 0;
  double streaming_greedy = 0;
};
BayesAccuracy AnalyticBayes(const TaskSpec &spec, int utts, uint64_t seed);

}  // namespace focce

#endif  // FOCCE_SYNTH_H_
