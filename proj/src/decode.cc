// focce/decode.cc
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

#include "focce/decode.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <utility>

#include "focce/common.h"
#include "focce/lattice.h"

namespace focce {

namespace {

double Lae(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

int KeyOf(const DecodeTable &table, const std::vector<int> &prefix) {
  int key = 0;
  for (int u = std::max<int>(0, prefix.size() - table.context);
       u < static_cast<int>(prefix.size()); ++u)
    key = key * (table.V + 1) + prefix[u];
  return key;
}

}  // namespace

DecodeTable MakeDecodeTable(const TransducerNet &net, const ParamSet &ps,
                            const Tensor &x, const ContextSchedule &schedule) {
  DecodeTable table;
  table.T = schedule.T;
  table.V = net.Config().vocab;
  table.context = net.Config().context;
  table.logp = net.DecodeLogProbs(ps, x, schedule);
  return table;
}

std::vector<int> GreedyDecode(const DecodeTable &table,
                              int max_symbols_per_frame) {
  FOCCE_CHECK_MSG(max_symbols_per_frame >= 1, "need at least one symbol slot");
  std::vector<int> out;
  int key = 0;
  for (int t = 1; t <= table.T; ++t) {
    for (int s = 0; s < max_symbols_per_frame; ++s) {
      int best = 1;
      for (int k = 2; k <= table.V; ++k)
        if (table.LogLabel(t, key, k) > table.LogLabel(t, key, best)) best = k;
      if (table.LogLabel(t, key, best) > table.LogBlank(t, key)) {
        out.push_back(best);
        key = table.NextKey(key, best);
      } else {
        break;
      }
    }
  }
  return out;
}

double RescoreSequence(const DecodeTable &table, const std::vector<int> &y) {
  int U = static_cast<int>(y.size());
  std::vector<int> key(U + 1, 0);
  for (int u = 1; u <= U; ++u) key[u] = table.NextKey(key[u - 1], y[u - 1]);
  // f[u]: mass over alignments that emitted y_1..y_u and consumed every
  // frame so far, including the current frame's blank.
  std::vector<double> f(U + 1, kLogZero);
  f[0] = 0.0;
  for (int t = 1; t <= table.T; ++t) {
    std::vector<double> h(U + 1, kLogZero);
    h[0] = f[0];
    for (int u = 1; u <= U; ++u)
      h[u] = Lae(f[u], h[u - 1] + table.LogLabel(t, key[u - 1], y[u - 1]));
    for (int u = 0; u <= U; ++u) h[u] += table.LogBlank(t, key[u]);
    f = std::move(h);
  }
  return f[U];
}

std::vector<int> BeamDecode(const DecodeTable &table, int beam,
                            int max_symbols_per_frame, int max_len) {
  FOCCE_CHECK_MSG(beam >= 1 && max_symbols_per_frame >= 1, "bad beam config");
  if (max_len < 0) max_len = table.T * max_symbols_per_frame;

  using PrefixMap = std::map<std::vector<int>, double>;
  auto merge = [](PrefixMap *m, const std::vector<int> &y, double lp) {
    auto it = m->find(y);
    if (it == m->end())
      (*m)[y] = lp;
    else
      it->second = Lae(it->second, lp);
  };
  // Ranks by score, ties by prefix for determinism.
  auto top = [](const PrefixMap &m, int n) {
    std::vector<std::pair<std::vector<int>, double>> v(m.begin(), m.end());
    std::stable_sort(v.begin(), v.end(), [](const auto &a, const auto &b) {
      return a.second > b.second;
    });
    if (static_cast<int>(v.size()) > n) v.resize(n);
    return v;
  };

  PrefixMap frontier;
  frontier[{}] = 0.0;
  for (int t = 1; t <= table.T; ++t) {
    PrefixMap finished;  // took blank at frame t
    PrefixMap active = std::move(frontier);
    frontier.clear();
    for (int round = 0;; ++round) {
      for (const auto &[y, lp] : active)
        merge(&finished, y, lp + table.LogBlank(t, KeyOf(table, y)));
      if (round == max_symbols_per_frame) break;
      PrefixMap cands;
      for (const auto &[y, lp] : active) {
        if (static_cast<int>(y.size()) >= max_len) continue;
        int key = KeyOf(table, y);
        std::vector<int> ext = y;
        ext.push_back(0);
        for (int k = 1; k <= table.V; ++k) {
          ext.back() = k;
          merge(&cands, ext, lp + table.LogLabel(t, key, k));
        }
      }
      if (cands.empty()) break;
      // Blank-ended and extending candidates compete for the same slots.
      std::vector<std::pair<std::vector<int>, double>> pool;
      for (const auto &e : finished) pool.emplace_back(e.first, e.second);
      size_t split = pool.size();
      for (const auto &e : cands) pool.emplace_back(e.first, e.second);
      std::vector<uint8_t> kind(pool.size(), 0);  // 1 = extending
      for (size_t i = split; i < pool.size(); ++i) kind[i] = 1;
      std::vector<int> order(pool.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pool[a].second > pool[b].second;
      });
      if (static_cast<int>(order.size()) > beam) order.resize(beam);
      PrefixMap new_finished, new_active;
      for (int i : order) {
        if (kind[i])
          new_active[pool[i].first] = pool[i].second;
        else
          new_finished[pool[i].first] = pool[i].second;
      }
      finished = std::move(new_finished);
      active = std::move(new_active);
      if (active.empty()) break;
    }
    for (const auto &[y, lp] : top(finished, beam)) frontier[y] = lp;
  }

  FOCCE_CHECK_MSG(!frontier.empty(), "beam search lost every hypothesis");
  // Frontier scores only count the alignment mass that survived pruning, so
  // rank the finalists by their exact likelihood instead. The greedy
  // sequence joins the pool whenever the length cap admits it.
  PrefixMap finalists;
  for (const auto &[y, lp] : frontier)
    finalists[y] = RescoreSequence(table, y);
  std::vector<int> greedy = GreedyDecode(table, max_symbols_per_frame);
  if (static_cast<int>(greedy.size()) <= max_len &&
      finalists.find(greedy) == finalists.end())
    finalists[greedy] = RescoreSequence(table, greedy);
  std::vector<int> best;
  double best_lp = kLogZero;
  bool have = false;
  for (const auto &[y, lp] : finalists) {
    if (!have || lp > best_lp) {
      best_lp = lp;
      best = y;
      have = true;
    }
  }
  return best;
}

std::vector<int> EnumerateMap(const TransducerNet &net, const ParamSet &ps,
                              const Tensor &x, const ContextSchedule &schedule,
                              int max_len) {
  int V = net.Config().vocab;
  double count = 0, pw = 1;
  for (int l = 0; l <= max_len; ++l) {
    count += pw;
    pw *= V;
  }
  FOCCE_CHECK_MSG(count <= 1e4, "enumeration space too large");

  std::vector<int> best;
  double best_lp = kLogZero;
  std::vector<int> seq;
  auto score = [&](const std::vector<int> &y) {
    ad::Tape tape;
    Mounted m = MountParams(tape, ps, false);
    return Likelihood(net.BuildProbTable(m, x, y, schedule)).Value()[0];
  };
  std::function<void()> walk = [&]() {
    double lp = score(seq);
    if (lp > best_lp) {
      best_lp = lp;
      best = seq;
    }
    if (static_cast<int>(seq.size()) == max_len) return;
    for (int k = 1; k <= V; ++k) {
      seq.push_back(k);
      walk();
      seq.pop_back();
    }
  };
  walk();
  return best;
}

int64_t EditDistance(const std::vector<int> &hyp, const std::vector<int> &ref) {
  size_t n = hyp.size(), m = ref.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      int64_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double TokenErrorRate(const std::vector<int> &hyp, const std::vector<int> &ref) {
  return static_cast<double>(EditDistance(hyp, ref)) /
         static_cast<double>(std::max<size_t>(1, ref.size()));
}

}  // namespace focce
