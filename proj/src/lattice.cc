// focce/lattice.cc
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

#include "focce/lattice.h"

#include <cmath>

#include "focce/common.h"

namespace focce {

LocalProbTable MakeLocalProbTable(ad::Var log_phi, ad::Var log_y,
                                  std::vector<int> target,
                                  bool validate_normalization) {
  FOCCE_CHECK(log_phi.tape != nullptr && log_phi.tape == log_y.tape);
  const Tensor &pv = log_phi.Value();
  const Tensor &yv = log_y.Value();
  FOCCE_CHECK_MSG(pv.Rank() == 2 && yv.Rank() == 3, "table ranks");
  const int T = pv.Dim(0);
  const int U = pv.Dim(1) - 1;
  const int V = yv.Dim(2);
  FOCCE_CHECK_MSG(T >= 1, "lattice needs at least one frame");
  FOCCE_CHECK_MSG(yv.Dim(0) == T && yv.Dim(1) == U + 1, "phi/Y shape mismatch");
  FOCCE_CHECK_MSG(static_cast<int>(target.size()) == U, "target length");
  for (int y : target) FOCCE_CHECK_MSG(y >= 1 && y <= V, "label out of range");
  if (validate_normalization) {
    for (int t = 1; t <= T; ++t) {
      for (int u = 0; u <= U; ++u) {
        double s = std::exp(pv[static_cast<int64_t>(t - 1) * (U + 1) + u]);
        for (int v = 1; v <= V; ++v)
          s += std::exp(
              yv[(static_cast<int64_t>(t - 1) * (U + 1) + u) * V + (v - 1)]);
        FOCCE_CHECK_MSG(std::abs(s - 1.0) <= 1e-9,
                        "local distribution not normalized");
      }
    }
  }
  LocalProbTable out;
  out.T = T;
  out.U = U;
  out.V = V;
  out.log_phi = log_phi;
  out.log_y = log_y;
  out.target = std::move(target);
  return out;
}

Tensor ForwardTable::Values() const {
  Tensor out({T + 1, U + 1});
  for (int t = 0; t <= T; ++t)
    for (int u = 0; u <= U; ++u) out.At(t, u) = Alpha(t, u).Value()[0];
  return out;
}

ForwardTable ForwardAlpha(const LocalProbTable &probs) {
  ad::Tape &tape = *probs.log_phi.tape;
  const int T = probs.T, U = probs.U;
  ForwardTable ft;
  ft.T = T;
  ft.U = U;
  ft.log_alpha.assign(static_cast<size_t>(T + 1) * (U + 1), ad::Var{});
  ad::Var zero = tape.ConstantScalar(0.0);
  ad::Var none = tape.ConstantScalar(kLogZero);
  auto cell = [&](int t, int u) -> ad::Var & {
    return ft.log_alpha[static_cast<size_t>(t) * (U + 1) + u];
  };
  // u-major fill: each cell needs (t-1,u) from this pass and (t,u-1) from the
  // previous one.
  for (int u = 0; u <= U; ++u) {
    cell(0, u) = none;
    for (int t = 1; t <= T; ++t) {
      if (t == 1 && u == 0) {
        cell(1, 0) = zero;
        continue;
      }
      // Horizontal predecessor (t-1,u) exists for t >= 2; at t == 1 it is
      // the alpha(0,u) = log-zero boundary and contributes nothing.
      bool has_h = t >= 2;
      bool has_v = u >= 1;
      ad::Var horiz, vert;
      if (has_h)
        horiz = cell(t - 1, u) + ad::At(probs.log_phi, probs.PhiIdx(t - 1, u));
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

ad::Var LikelihoodFromTable(const LocalProbTable &probs,
                            const ForwardTable &table) {
  return table.Alpha(probs.T, probs.U) +
         ad::At(probs.log_phi, probs.PhiIdx(probs.T, probs.U));
}

ad::Var Likelihood(const LocalProbTable &probs) {
  ForwardTable ft = ForwardAlpha(probs);
  return LikelihoodFromTable(probs, ft);
}

double LatticePathCount(int T, int U) {
  // C(T-1+U, U) without overflow at guard scale.
  double c = 1.0;
  for (int i = 1; i <= U; ++i)
    c *= static_cast<double>(T - 1 + i) / static_cast<double>(i);
  return c;
}

namespace {

// Depth-first sum over suffix paths from (t,u) with the path prefix product
// accumulated in linear space.
double PathSum(const Tensor &log_phi, const Tensor &log_y,
               const std::vector<int> &target, int T, int U, int V, int t,
               int u, double prefix) {
  if (t == T && u == U) {
    return prefix *
           std::exp(log_phi[static_cast<int64_t>(T - 1) * (U + 1) + U]);
  }
  double total = 0.0;
  if (t < T) {
    double phi = std::exp(log_phi[static_cast<int64_t>(t - 1) * (U + 1) + u]);
    total += PathSum(log_phi, log_y, target, T, U, V, t + 1, u, prefix * phi);
  }
  if (u < U) {
    double y = std::exp(
        log_y[(static_cast<int64_t>(t - 1) * (U + 1) + u) * V +
              (target[u] - 1)]);
    total += PathSum(log_phi, log_y, target, T, U, V, t, u + 1, prefix * y);
  }
  return total;
}

}  // namespace

double OracleEnumerate(const Tensor &log_phi, const Tensor &log_y,
                       const std::vector<int> &target) {
  FOCCE_CHECK_MSG(log_phi.Rank() == 2 && log_y.Rank() == 3, "table ranks");
  const int T = log_phi.Dim(0);
  const int U = log_phi.Dim(1) - 1;
  const int V = log_y.Dim(2);
  FOCCE_CHECK_MSG(T >= 1, "lattice needs at least one frame");
  FOCCE_CHECK_MSG(static_cast<int>(target.size()) == U, "target length");
  FOCCE_CHECK_MSG(LatticePathCount(T, U) <= 1e6,
                  "path enumeration guard exceeded");
  double s = PathSum(log_phi, log_y, target, T, U, V, 1, 0, 1.0);
  return std::log(s);
}

}  // namespace focce
