// focce/test_lattice.cc
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "focce/lattice.h"
#include "focce/rng.h"
#include "test_util.h"

namespace focce {
namespace {

using testutil::MountTable;
using testutil::RandomRawTable;
using testutil::RawTable;

TEST_CASE("single frame, empty target") {
  ad::Tape tape;
  ad::Var phi = tape.Leaf(Tensor({1, 1}, {std::log(0.5)}), true);
  ad::Var y = tape.Leaf(Tensor({1, 1, 1}, {std::log(0.5)}), true);
  LocalProbTable probs = MakeLocalProbTable(phi, y, {});
  ad::Var lik = Likelihood(probs);
  CHECK(lik.Value()[0] == doctest::Approx(-0.693147).epsilon(1e-5));
}

TEST_CASE("empty target is the blank-only path") {
  Rng rng(11);
  for (int T = 1; T <= 5; ++T) {
    RawTable rt = RandomRawTable(rng, T, /*U=*/0, /*V=*/3);
    ad::Tape tape;
    LocalProbTable probs = MountTable(tape, rt, false);
    double expect = 0.0;
    for (int t = 1; t <= T; ++t) expect += rt.log_phi.At(t - 1, 0);
    CHECK(Likelihood(probs).Value()[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("two-frame one-label worked example") {
  // phi(1,0)=0.6, Y(1,0,y1)=0.3, phi(1,1)=0.5, Y(2,0,y1)=0.4, phi(2,1)=0.7:
  // alpha(2,1) = 0.3*0.5 + 0.6*0.4 = 0.39, likelihood = ln(0.39*0.7).
  ad::Tape tape;
  Tensor log_phi({2, 2});
  log_phi.At(0, 0) = std::log(0.6);
  log_phi.At(0, 1) = std::log(0.5);
  log_phi.At(1, 0) = std::log(0.9);  // unused by any accepting path
  log_phi.At(1, 1) = std::log(0.7);
  Tensor log_y({2, 2, 1});
  log_y.At(0, 0, 0) = std::log(0.3);
  log_y.At(0, 1, 0) = std::log(0.1);  // unused
  log_y.At(1, 0, 0) = std::log(0.4);
  log_y.At(1, 1, 0) = std::log(0.1);  // unused
  LocalProbTable probs = MakeLocalProbTable(
      tape.Leaf(log_phi, true), tape.Leaf(log_y, true), {1});

  ForwardTable ft = ForwardAlpha(probs);
  CHECK(ft.Alpha(2, 1).Value()[0] ==
        doctest::Approx(std::log(0.39)).epsilon(1e-12));
  double lik = LikelihoodFromTable(probs, ft).Value()[0];
  CHECK(lik == doctest::Approx(-1.29828).epsilon(1e-5));
  CHECK(lik == doctest::Approx(OracleEnumerate(log_phi, log_y, {1}))
                   .epsilon(1e-12));
}

TEST_CASE("all mass on blank forces log-zero for nonempty targets") {
  ad::Tape tape;
  Tensor log_phi = Tensor::Full({2, 2}, 0.0);  // phi = 1 everywhere
  Tensor log_y = Tensor::Full({2, 2, 1}, kLogZero);
  ad::Var phi = tape.Leaf(log_phi, false);
  ad::Var y = tape.Leaf(
      Tensor({2, 2, 1},
             std::vector<double>(4, kLogZero), /*allow_log_zero=*/true),
      false);
  LocalProbTable probs = MakeLocalProbTable(phi, y, {1});
  CHECK(Likelihood(probs).Value()[0] == kLogZero);
}

TEST_CASE("single frame with two labels has exactly one path") {
  Rng rng(5);
  RawTable rt = RandomRawTable(rng, /*T=*/1, /*U=*/2, /*V=*/3);
  ad::Tape tape;
  LocalProbTable probs = MountTable(tape, rt, false);
  double expect = rt.log_y.At(0, 0, rt.target[0] - 1) +
                  rt.log_y.At(0, 1, rt.target[1] - 1) + rt.log_phi.At(0, 2);
  CHECK(Likelihood(probs).Value()[0] ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK(OracleEnumerate(rt.log_phi, rt.log_y, rt.target) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("path counting") {
  CHECK(LatticePathCount(3, 2) == 6.0);
  CHECK(LatticePathCount(1, 2) == 1.0);
  CHECK(LatticePathCount(4, 0) == 1.0);
}

TEST_CASE("uniform table matches the closed-form path count") {
  for (int V : {1, 2, 4}) {
    for (int T = 1; T <= 5; ++T) {
      for (int U = 0; U <= 3; ++U) {
        double p = -std::log(static_cast<double>(V + 1));
        ad::Tape tape;
        ad::Var phi = tape.Leaf(Tensor::Full({T, U + 1}, p), false);
        ad::Var y = tape.Leaf(Tensor::Full({T, U + 1, V}, p), false);
        std::vector<int> target(U, 1);
        LocalProbTable probs = MakeLocalProbTable(phi, y, target, true);
        double expect = std::log(LatticePathCount(T, U)) + (T + U) * p;
        CHECK(Likelihood(probs).Value()[0] ==
              doctest::Approx(expect).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("forward recursion agrees with path enumeration on random tables") {
  Rng rng(20260815);
  for (int trial = 0; trial < 200; ++trial) {
    int T = 1 + rng.Int(6), U = rng.Int(5), V = 1 + rng.Int(5);
    RawTable rt = RandomRawTable(rng, T, U, V);
    ad::Tape tape;
    LocalProbTable probs = MountTable(tape, rt, false);
    double lik = Likelihood(probs).Value()[0];
    double oracle = OracleEnumerate(rt.log_phi, rt.log_y, rt.target);
    CHECK(std::abs(lik - oracle) <= 1e-10);
    CHECK(lik <= 1e-9);  // normalized tables never exceed probability 1
  }
}

TEST_CASE("likelihood gradients match finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    int T = 2 + rng.Int(3), U = 1 + rng.Int(2), V = 1 + rng.Int(3);
    RawTable rt = RandomRawTable(rng, T, U, V);

    ad::Tape tape;
    LocalProbTable probs = MountTable(tape, rt, true);
    ad::Var lik = Likelihood(probs);
    tape.Backward(lik);
    Tensor gphi = tape.GradOf(probs.log_phi);
    Tensor gy = tape.GradOf(probs.log_y);

    auto eval = [&](const Tensor &phi, const Tensor &y) {
      ad::Tape t2;
      LocalProbTable p2 = MakeLocalProbTable(t2.Leaf(phi, false),
                                             t2.Leaf(y, false), rt.target);
      return Likelihood(p2).Value()[0];
    };
    const double step = 1e-5;
    for (int64_t i = 0; i < rt.log_phi.NumEl(); ++i) {
      Tensor plus = rt.log_phi, minus = rt.log_phi;
      plus[i] += step;
      minus[i] -= step;
      double fd = (eval(plus, rt.log_y) - eval(minus, rt.log_y)) / (2 * step);
      CHECK(std::abs(gphi[i] - fd) /
                std::max({1.0, std::abs(gphi[i]), std::abs(fd)}) <=
            1e-4);
    }
    for (int64_t i = 0; i < rt.log_y.NumEl(); ++i) {
      Tensor plus = rt.log_y, minus = rt.log_y;
      plus[i] += step;
      minus[i] -= step;
      double fd = (eval(rt.log_phi, plus) - eval(rt.log_phi, minus)) / (2 * step);
      CHECK(std::abs(gy[i] - fd) /
                std::max({1.0, std::abs(gy[i]), std::abs(fd)}) <=
            1e-4);
    }
  }
}

TEST_CASE("total mass over all targets stays below one") {
  Rng rng(31);
  const int T = 3, V = 2, U_max = 3;
  for (int trial = 0; trial < 5; ++trial) {
    RawTable base = RandomRawTable(rng, T, U_max, V);
    double mass = 0.0;
    // All label sequences of length 0..U_max; tables for shorter targets
    // reuse the leading columns of the base table.
    std::vector<int> target;
    std::function<void(int)> recurse = [&](int remaining) {
      int U = static_cast<int>(target.size());
      Tensor phi({T, U + 1});
      Tensor y({T, U + 1, V});
      for (int t = 0; t < T; ++t)
        for (int u = 0; u <= U; ++u) {
          phi.At(t, u) = base.log_phi.At(t, u);
          for (int v = 0; v < V; ++v) y.At(t, u, v) = base.log_y.At(t, u, v);
        }
      ad::Tape tape;
      LocalProbTable probs = MakeLocalProbTable(tape.Leaf(phi, false),
                                                tape.Leaf(y, false), target);
      mass += std::exp(Likelihood(probs).Value()[0]);
      if (remaining == 0) return;
      for (int v = 1; v <= V; ++v) {
        target.push_back(v);
        recurse(remaining - 1);
        target.pop_back();
      }
    };
    recurse(U_max);
    CHECK(mass <= 1.0 + 1e-9);
  }
}

TEST_CASE("guards") {
  CHECK_THROWS_AS(OracleEnumerate(Tensor({40, 21}), Tensor({40, 21, 2}),
                                  std::vector<int>(20, 1)),
                  ContractError);
  ad::Tape tape;
  CHECK_THROWS_AS(
      MakeLocalProbTable(tape.Leaf(Tensor({2, 2}), false),
                         tape.Leaf(Tensor({2, 2, 3}), false), {7}),
      ContractError);  // label out of range
}

}  // namespace
}  // namespace focce
