// focce/synth.cc
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

#include "focce/synth.h"

#include <algorithm>
#include <cmath>

#include "focce/common.h"
#include "focce/streaming.h"

namespace focce {

namespace {

constexpr double kAmplitude = 1.2;

void CheckSpec(const TaskSpec &s) {
  FOCCE_CHECK_MSG(s.vocab >= 1 && s.feature_dim >= 2 && s.chunk >= 1 &&
                      s.right >= 0 && s.stack >= 1 && s.horizon >= 0 &&
                      s.noise >= 0 && s.emit_rate > 0,
                  "bad task spec");
  // The latest first-event slot is the second chunk; its closing frame must
  // still fit inside the shortest sequence.
  FOCCE_CHECK_MSG(s.min_len >= s.chunk * s.stack + s.horizon + 1 &&
                      s.max_len >= s.min_len,
                  "sequences too short for the event length");
}

}  // namespace

Tensor MarkerRow(const TaskSpec &spec, int prev_label) {
  CheckSpec(spec);
  FOCCE_CHECK_MSG(prev_label >= 0 && prev_label <= spec.vocab,
                  "prev_label out of range");
  Tensor v({spec.feature_dim});
  // Markers get their own plane when there is room, decoupling event
  // detection from label classification.
  int base = spec.feature_dim >= 4 ? 2 : 0;
  double angle = prev_label == 0
                     ? M_PI / spec.vocab
                     : 2.0 * M_PI * (prev_label - 1) / spec.vocab;
  v[base] = kAmplitude * std::cos(angle);
  v[base + 1] = kAmplitude * std::sin(angle);
  return v;
}

Tensor ClosingRow(const TaskSpec &spec, int label) {
  CheckSpec(spec);
  FOCCE_CHECK_MSG(label >= 1 && label <= spec.vocab, "label out of range");
  Tensor v({spec.feature_dim});
  double angle = 2.0 * M_PI * (label - 1) / spec.vocab;
  v[0] = kAmplitude * std::cos(angle);
  v[1] = kAmplitude * std::sin(angle);
  return v;
}

Utterance SynthUtterance(const TaskSpec &spec, Rng &rng,
                         std::vector<Event> *events) {
  CheckSpec(spec);
  int cr = spec.chunk * spec.stack;  // chunk length in raw frames
  int T = spec.min_len + rng.Int(spec.max_len - spec.min_len + 1);
  Utterance utt;
  utt.x = Tensor({T, spec.feature_dim});
  for (int64_t i = 0; i < utt.x.NumEl(); ++i)
    utt.x[i] = spec.noise * rng.Normal();
  if (events) events->clear();

  // Slots count in chunks. The gap is deterministic: it keeps one event's
  // closing frame out of the next event's marker chunk and matches the
  // requested rate. Randomness enters through the start slot, the sequence
  // length, the labels, and the noise; a fixed cadence keeps whether the
  // coming chunk holds a marker a well-posed function of the past.
  int gap = std::max(spec.horizon / cr + 1,
                     static_cast<int>(std::lround(1.0 / (spec.emit_rate * cr))));
  int slot = rng.Int(2);  // first or second chunk; at least one event fits
  int prev = 0;
  for (;;) {
    int p = cr * slot + 1;
    if (p + spec.horizon > T) break;
    int label = 1 + rng.Int(spec.vocab);
    Tensor mk = MarkerRow(spec, prev);
    for (int j = 0; j < spec.horizon; ++j)
      for (int d = 0; d < spec.feature_dim; ++d)
        utt.x.At(p - 1 + j, d) += mk[d];
    Tensor close = ClosingRow(spec, label);
    for (int d = 0; d < spec.feature_dim; ++d)
      utt.x.At(p - 1 + spec.horizon, d) += close[d];
    utt.y.push_back(label);
    if (events) events->push_back({p, label});
    slot += gap;
    prev = label;
  }
  return utt;
}

std::vector<Utterance> SynthGenerate(const TaskSpec &spec, int n,
                                     uint64_t seed) {
  Rng rng(seed);
  std::vector<Utterance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng fork(rng.Fork());
    out.push_back(SynthUtterance(spec, fork));
  }
  return out;
}

BayesAccuracy AnalyticBayes(const TaskSpec &spec, int utts, uint64_t seed) {
  CheckSpec(spec);
  std::vector<Tensor> closing(spec.vocab);
  for (int k = 1; k <= spec.vocab; ++k) closing[k - 1] = ClosingRow(spec, k);
  Rng rng(seed);
  int64_t total = 0, full_ok = 0, stream_ok = 0;
  for (int i = 0; i < utts; ++i) {
    Rng fork(rng.Fork());
    std::vector<Event> events;
    Utterance utt = SynthUtterance(spec, fork, &events);
    int raw = utt.x.Dim(0);
    int T = (raw + spec.stack - 1) / spec.stack;
    ContextSchedule sch = MakeSchedule(spec.chunk, spec.right, T);
    for (const Event &ev : events) {
      // Raw frames visible when the event frame is processed. Only the
      // closing frame separates the labels (the marker depends on the
      // previous event alone), so the matched filter is a nearest-direction
      // test there. When the closing frame is not yet visible every label
      // scores the same and the first one wins.
      int step = (ev.pos + spec.stack - 1) / spec.stack;
      int visible = std::min(raw, sch.E(step) * spec.stack);
      auto classify = [&](int upto) {
        int best = 1;
        double best_d = 0;
        int frame = ev.pos + spec.horizon;
        for (int k = 1; k <= spec.vocab && frame <= upto; ++k) {
          double dist = 0;
          for (int d = 0; d < spec.feature_dim; ++d) {
            double diff = utt.x.At(frame - 1, d) - closing[k - 1][d];
            dist += diff * diff;
          }
          if (k == 1 || dist < best_d) {
            best = k;
            best_d = dist;
          }
        }
        return best;
      };
      ++total;
      if (classify(raw) == ev.label) ++full_ok;
      if (classify(visible) == ev.label) ++stream_ok;
    }
  }
  FOCCE_CHECK_MSG(total > 0, "no events generated");
  BayesAccuracy acc;
  acc.full = static_cast<double>(full_ok) / total;
  acc.streaming_greedy = static_cast<double>(stream_ok) / total;
  return acc;
}

}  // namespace focce
