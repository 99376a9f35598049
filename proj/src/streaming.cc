// focce/streaming.cc
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

#include "focce/streaming.h"

#include <cmath>

#include "focce/common.h"

namespace focce {

int ContextEnd(int C, int R, int T, int t) {
  FOCCE_CHECK_MSG(C >= 1 && R >= 0, "bad schedule parameters");
  FOCCE_CHECK_MSG(t >= 1 && t <= T, "frame index out of range");
  const int chunk_end = C * ((t + C - 1) / C);
  return std::min(T, chunk_end + R);
}

std::vector<int> ContextSchedule::BoundaryFrames() const {
  std::vector<int> out;
  for (int t = 1; t <= T; ++t)
    if (IsBoundary(t)) out.push_back(t);
  return out;
}

ContextSchedule MakeSchedule(int C, int R, int T) {
  FOCCE_CHECK_MSG(T >= 1, "schedule needs at least one frame");
  ContextSchedule s;
  s.C = C;
  s.R = R;
  s.T = T;
  s.e.resize(T);
  s.boundary.assign(T, 0);
  for (int t = 1; t <= T; ++t) s.e[t - 1] = ContextEnd(C, R, T, t);
  for (int t = 1; t < T; ++t)
    s.boundary[t - 1] = s.e[t - 1] < s.e[t] ? 1 : 0;
  return s;
}

FoCCTable ZeroFoCCTable(ad::Tape &tape, const ContextSchedule &schedule,
                        int U) {
  FoCCTable f;
  f.T = schedule.T;
  f.U = U;
  f.boundary_frames = schedule.BoundaryFrames();
  f.row_of_frame.assign(schedule.T + 1, -1);
  for (size_t i = 0; i < f.boundary_frames.size(); ++i)
    f.row_of_frame[f.boundary_frames[i]] = static_cast<int>(i);
  const int B = static_cast<int>(f.boundary_frames.size());
  f.log_gamma_rows =
      tape.Constant(Tensor({B, U + 1}));  // all-zero rows, gamma = 1
  return f;
}

FoCCTable MakeFoCCTable(const ContextSchedule &schedule, int U, ad::Var rows) {
  FoCCTable f;
  f.T = schedule.T;
  f.U = U;
  f.boundary_frames = schedule.BoundaryFrames();
  f.row_of_frame.assign(schedule.T + 1, -1);
  for (size_t i = 0; i < f.boundary_frames.size(); ++i)
    f.row_of_frame[f.boundary_frames[i]] = static_cast<int>(i);
  const Tensor &rv = rows.Value();
  FOCCE_CHECK_MSG(rv.Rank() == 2 &&
                      rv.Dim(0) == static_cast<int>(f.boundary_frames.size()) &&
                      rv.Dim(1) == U + 1,
                  "compensation rows do not match the schedule");
  FOCCE_CHECK_MSG(rv.AllFinite(false), "compensation weights must be finite");
  f.log_gamma_rows = rows;
  return f;
}

FoCCTable MakeFoCCTableDense(ad::Tape &tape, const ContextSchedule &schedule,
                             int U, const Tensor &dense_log_gamma,
                             bool requires_grad) {
  FOCCE_CHECK_MSG(dense_log_gamma.Rank() == 2 &&
                      dense_log_gamma.Dim(0) == schedule.T &&
                      dense_log_gamma.Dim(1) == U + 1,
                  "dense compensation table shape");
  std::vector<int> frames = schedule.BoundaryFrames();
  const int B = static_cast<int>(frames.size());
  Tensor rows({B, U + 1});
  for (int t = 1; t <= schedule.T; ++t) {
    bool on_boundary = t < schedule.T && schedule.IsBoundary(t);
    for (int u = 0; u <= U; ++u) {
      double v = dense_log_gamma.At(t - 1, u);
      if (!on_boundary) {
        FOCCE_CHECK_MSG(v == 0.0,
                        "compensation weight off the boundary set must be 0");
      }
    }
  }
  for (int i = 0; i < B; ++i)
    for (int u = 0; u <= U; ++u) rows.At(i, u) = dense_log_gamma.At(frames[i] - 1, u);
  return MakeFoCCTable(schedule, U, tape.Leaf(std::move(rows), requires_grad));
}

ad::Var DeformedLikelihood(const LocalProbTable &probs) {
  return Likelihood(probs);
}

ForwardTable ModifiedForward(const LocalProbTable &probs,
                             const ContextSchedule &schedule,
                             const FoCCTable &focc, bool detach_focc) {
  FOCCE_CHECK_MSG(schedule.T == probs.T && focc.T == probs.T &&
                      focc.U == probs.U,
                  "schedule/table size mismatch");
  ad::Tape &tape = *probs.log_phi.tape;
  const int T = probs.T, U = probs.U;
  const bool any_rows = !focc.boundary_frames.empty();
  ad::Var gamma_rows;
  if (any_rows) {
    gamma_rows = detach_focc ? ad::StopGradient(focc.log_gamma_rows)
                             : focc.log_gamma_rows;
  }
  ForwardTable ft;
  ft.T = T;
  ft.U = U;
  ft.log_alpha.assign(static_cast<size_t>(T + 1) * (U + 1), ad::Var{});
  ad::Var zero = tape.ConstantScalar(0.0);
  ad::Var none = tape.ConstantScalar(kLogZero);
  auto cell = [&](int t, int u) -> ad::Var & {
    return ft.log_alpha[static_cast<size_t>(t) * (U + 1) + u];
  };
  for (int u = 0; u <= U; ++u) {
    cell(0, u) = none;
    for (int t = 1; t <= T; ++t) {
      if (t == 1 && u == 0) {
        cell(1, 0) = zero;
        continue;
      }
      bool has_h = t >= 2;
      bool has_v = u >= 1;
      ad::Var horiz, vert;
      if (has_h) {
        horiz = cell(t - 1, u) + ad::At(probs.log_phi, probs.PhiIdx(t - 1, u));
        // The compensation weight rides on the blank transition leaving
        // frame t-1; frames off the boundary set have gamma = 1 and add
        // nothing, structurally.
        if (focc.HasRow(t - 1)) {
          int64_t idx = static_cast<int64_t>(focc.Row(t - 1)) * (U + 1) + u;
          horiz = horiz + ad::At(gamma_rows, idx);
        }
      }
      if (has_v)
        vert = cell(t, u - 1) +
               ad::At(probs.log_y, probs.YIdx(t, u - 1, probs.target[u - 1]));
      if (has_h && has_v)
        cell(t, u) = ad::LogAddExp(horiz, vert);
      else if (has_h)
        cell(t, u) = horiz;
      else if (has_v)
        cell(t, u) = vert;
      else
        cell(t, u) = none;
    }
  }
  return ft;
}

ad::Var ModifiedLikelihood(const LocalProbTable &probs,
                           const ContextSchedule &schedule,
                           const FoCCTable &focc, bool detach_focc) {
  ForwardTable ft = ModifiedForward(probs, schedule, focc, detach_focc);
  return LikelihoodFromTable(probs, ft);
}

namespace {

double WeightedPathSum(const Tensor &log_phi, const Tensor &log_y,
                       const std::vector<int> &target, const Tensor &log_gamma,
                       int T, int U, int V, int t, int u, double prefix) {
  if (t == T && u == U) {
    return prefix *
           std::exp(log_phi[static_cast<int64_t>(T - 1) * (U + 1) + U]);
  }
  double total = 0.0;
  if (t < T) {
    double w = std::exp(log_phi[static_cast<int64_t>(t - 1) * (U + 1) + u] +
                        log_gamma.At(t - 1, u));
    total += WeightedPathSum(log_phi, log_y, target, log_gamma, T, U, V, t + 1,
                             u, prefix * w);
  }
  if (u < U) {
    double y = std::exp(log_y[(static_cast<int64_t>(t - 1) * (U + 1) + u) * V +
                              (target[u] - 1)]);
    total += WeightedPathSum(log_phi, log_y, target, log_gamma, T, U, V, t,
                             u + 1, prefix * y);
  }
  return total;
}

}  // namespace

double OracleEnumerateWeighted(const Tensor &log_phi, const Tensor &log_y,
                               const std::vector<int> &target,
                               const Tensor &dense_log_gamma) {
  const int T = log_phi.Dim(0);
  const int U = log_phi.Dim(1) - 1;
  const int V = log_y.Dim(2);
  FOCCE_CHECK_MSG(dense_log_gamma.Dim(0) == T &&
                      dense_log_gamma.Dim(1) == U + 1,
                  "compensation table shape");
  FOCCE_CHECK_MSG(LatticePathCount(T, U) <= 1e6,
                  "path enumeration guard exceeded");
  double s = WeightedPathSum(log_phi, log_y, target, dense_log_gamma, T, U, V,
                             1, 0, 1.0);
  return std::log(s);
}

}  // namespace focce
