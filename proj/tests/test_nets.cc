// focce/test_nets.cc
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

#include "focce/focce_net.h"
#include "focce/lattice.h"
#include "focce/params.h"
#include "focce/rng.h"
#include "focce/streaming.h"
#include "focce/transducer_net.h"

namespace focce {
namespace {

Tensor RandFeatures(Rng &rng, int frames, int dim) {
  Tensor x({frames, dim});
  for (int64_t i = 0; i < x.NumEl(); ++i) x[i] = rng.Normal();
  return x;
}

std::vector<int> RandTarget(Rng &rng, int U, int V) {
  std::vector<int> y(U);
  for (int &t : y) t = 1 + rng.Int(V);
  return y;
}

TransducerConfig TinyTransducer() {
  TransducerConfig cfg;
  cfg.feature_dim = 2;
  cfg.stack = 1;
  cfg.encoder_dim = 4;
  cfg.encoder_layers = 2;
  cfg.kernel = 2;
  cfg.vocab = 3;
  cfg.context = 2;
  cfg.embed_dim = 3;
  cfg.predictor_dim = 4;
  cfg.joiner_dim = 4;
  return cfg;
}

FoCCENetConfig TinyEstimator(int chunk) {
  FoCCENetConfig cfg;
  cfg.feature_dim = 2;
  cfg.stack = 1;
  cfg.chunk = chunk;
  cfg.encoder_dim = 4;
  cfg.encoder_layers = 1;
  cfg.kernel = 2;
  cfg.vocab = 3;
  cfg.embed_dim = 3;
  cfg.predictor_dim = 4;
  cfg.flow_hidden = 8;
  return cfg;
}

// Central finite differences of a ParamSet functional against recorded
// gradients.
void CheckParamGrads(const ParamSet &ps, const std::vector<Tensor> &grads,
                     const std::function<double(const ParamSet &)> &eval,
                     double tol) {
  const double step = 1e-5;
  for (int h = 0; h < ps.Size(); ++h) {
    for (int64_t i = 0; i < ps.Value(h).NumEl(); ++i) {
      ParamSet plus = ps, minus = ps;
      plus.Value(h)[i] += step;
      minus.Value(h)[i] -= step;
      double fd = (eval(plus) - eval(minus)) / (2 * step);
      double an = grads[h][i];
      CHECK(std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}) <=
            tol);
    }
  }
}

TEST_CASE("frame stacking pads the ragged tail with zeros") {
  Tensor x({5, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  Tensor s = StackFrames(x, 2);
  CHECK(s.Dim(0) == 3);
  CHECK(s.Dim(1) == 4);
  CHECK(s.At(0, 0) == 1);
  CHECK(s.At(0, 3) == 4);
  CHECK(s.At(2, 0) == 9);
  CHECK(s.At(2, 1) == 10);
  CHECK(s.At(2, 2) == 0.0);
  CHECK(s.At(2, 3) == 0.0);
  CHECK(StackFrames(x, 1).SameShape(x));
}

TEST_CASE("prob table is locally normalized and correctly indexed") {
  Rng rng(21);
  ParamSet ps;
  TransducerNet net(TinyTransducer(), &ps, "theta", rng);
  int T = 6;
  ContextSchedule sch = MakeSchedule(2, 1, T);
  Tensor x = RandFeatures(rng, T, 2);
  std::vector<int> y = RandTarget(rng, 2, 3);

  ad::Tape tape;
  Mounted m = MountParams(tape, ps);
  LocalProbTable table = net.BuildProbTable(m, x, y, sch);
  CHECK(table.T == T);
  CHECK(table.U == 2);
  CHECK(table.V == 3);
  const Tensor &phi = table.log_phi.Value();
  const Tensor &ly = table.log_y.Value();
  for (int t = 1; t <= T; ++t) {
    for (int u = 0; u <= table.U; ++u) {
      double mass = std::exp(phi[table.PhiIdx(t, u)]);
      for (int k = 1; k <= table.V; ++k) mass += std::exp(ly[table.YIdx(t, u, k)]);
      CHECK(std::abs(mass - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("zeroed joiner output layer gives the uniform distribution") {
  Rng rng(22);
  ParamSet ps;
  TransducerConfig cfg = TinyTransducer();
  TransducerNet net(cfg, &ps, "theta", rng);
  Tensor &wout = ps.Value(ps.Find("theta.join.w_out"));
  for (int64_t i = 0; i < wout.NumEl(); ++i) wout[i] = 0.0;

  ContextSchedule sch = MakeSchedule(2, 0, 4);
  ad::Tape tape;
  Mounted m = MountParams(tape, ps);
  LocalProbTable table =
      net.BuildProbTable(m, RandFeatures(rng, 4, 2), {1, 2}, sch);
  double expect = -std::log(static_cast<double>(cfg.vocab + 1));
  const Tensor &phi = table.log_phi.Value();
  for (int64_t i = 0; i < phi.NumEl(); ++i)
    CHECK(std::abs(phi[i] - expect) <= 1e-12);
}

TEST_CASE("stateless predictor depends on exactly the context window") {
  Rng rng(23);
  ParamSet ps;
  TransducerNet net(TinyTransducer(), &ps, "theta", rng);
  ad::Tape tape;
  Mounted m = MountParams(tape, ps, false);

  // Last two tokens of prefixes a and b agree at the final row.
  Tensor a = net.Predict(m, {1, 2, 3, 1, 2}).Value();
  Tensor b = net.Predict(m, {3, 3, 1, 2}).Value();
  for (int j = 0; j < a.Dim(1); ++j) CHECK(a.At(5, j) == b.At(4, j));

  // Differing final token separates outputs.
  Tensor c = net.Predict(m, {1, 2, 3, 1, 3}).Value();
  double diff = 0.0;
  for (int j = 0; j < a.Dim(1); ++j) diff += std::abs(a.At(5, j) - c.At(5, j));
  CHECK(diff > 1e-8);

  // Row 0 (start token only) is one fixed vector regardless of the target.
  for (int j = 0; j < a.Dim(1); ++j) CHECK(a.At(0, j) == c.At(0, j));
}

TEST_CASE("transducer encoder and table columns are chunk-causal, bit level") {
  Rng rng(24);
  ParamSet ps;
  TransducerNet net(TinyTransducer(), &ps, "theta", rng);
  int T = 8;
  ContextSchedule sch = MakeSchedule(3, 1, T);
  std::vector<int> y = RandTarget(rng, 2, 3);

  for (int probe = 0; probe < 10; ++probe) {
    Tensor x = RandFeatures(rng, T, 2);
    int frame = 2 + rng.Int(T - 2);  // perturb raw frame (1-based)
    Tensor x2 = x;
    x2.At(frame - 1, rng.Int(2)) += 1.0 + rng.Uniform();

    ad::Tape t1, t2;
    Mounted m1 = MountParams(t1, ps, false);
    Mounted m2 = MountParams(t2, ps, false);
    Tensor f1 = net.Encode(m1, x, sch).Value();
    Tensor f2 = net.Encode(m2, x2, sch).Value();
    LocalProbTable tb1 = net.BuildProbTable(m1, x, y, sch);
    LocalProbTable tb2 = net.BuildProbTable(m2, x2, y, sch);
    for (int t = 1; t <= T; ++t) {
      if (sch.E(t) >= frame) continue;  // frame visible, change expected
      for (int j = 0; j < f1.Dim(1); ++j) CHECK(f1.At(t - 1, j) == f2.At(t - 1, j));
      for (int u = 0; u <= 2; ++u) {
        CHECK(tb1.log_phi.Value()[tb1.PhiIdx(t, u)] ==
              tb2.log_phi.Value()[tb2.PhiIdx(t, u)]);
        for (int k = 1; k <= 3; ++k)
          CHECK(tb1.log_y.Value()[tb1.YIdx(t, u, k)] ==
                tb2.log_y.Value()[tb2.YIdx(t, u, k)]);
      }
    }
  }
}

TEST_CASE("single-chunk schedule reproduces the full-context encoder") {
  Rng rng(25);
  ParamSet ps;
  TransducerNet net(TinyTransducer(), &ps, "theta", rng);
  int T = 6;
  Tensor x = RandFeatures(rng, T, 2);
  ad::Tape t1, t2;
  Mounted m1 = MountParams(t1, ps, false);
  Mounted m2 = MountParams(t2, ps, false);
  Tensor a = net.Encode(m1, x, MakeSchedule(T, 0, T)).Value();
  Tensor b = net.Encode(m2, x, MakeSchedule(4 * T, 3, T)).Value();
  for (int64_t i = 0; i < a.NumEl(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("deformed likelihood gradients match finite differences") {
  Rng rng(26);
  ParamSet ps;
  TransducerNet net(TinyTransducer(), &ps, "theta", rng);
  int T = 4;
  ContextSchedule sch = MakeSchedule(2, 0, T);
  Tensor x = RandFeatures(rng, T, 2);
  std::vector<int> y = RandTarget(rng, 2, 3);

  ad::Tape tape;
  Mounted m = MountParams(tape, ps);
  ad::Var ll = DeformedLikelihood(net.BuildProbTable(m, x, y, sch));
  tape.Backward(ll);
  std::vector<Tensor> grads = CollectGrads(tape, m);

  CheckParamGrads(ps, grads, [&](const ParamSet &p) {
    ad::Tape t;
    Mounted mm = MountParams(t, p, false);
    return DeformedLikelihood(net.BuildProbTable(mm, x, y, sch)).Value()[0];
  }, 1e-4);
}

TEST_CASE("chunk targets slice the next chunk and mask the ragged tail") {
  Rng rng(27);
  ParamSet ps;
  FoCCENet est(TinyEstimator(2), &ps, "omega", rng);
  {
    // T=6, C=2: boundaries at t=2 and t=4, all chunks full.
    ContextSchedule sch = MakeSchedule(2, 0, 6);
    Tensor x = RandFeatures(rng, 6, 2);
    Tensor v, mask;
    bool padded = true;
    est.ChunkTargets(x, sch, &v, &mask, &padded);
    CHECK(v.Dim(0) == 2);
    CHECK(v.Dim(1) == 4);
    CHECK(!padded);
    // Row 0 covers frames 3,4; row 1 covers frames 5,6.
    CHECK(v.At(0, 0) == x.At(2, 0));
    CHECK(v.At(0, 3) == x.At(3, 1));
    CHECK(v.At(1, 0) == x.At(4, 0));
    CHECK(v.At(1, 3) == x.At(5, 1));
    for (int64_t i = 0; i < mask.NumEl(); ++i) CHECK(mask[i] == 1.0);
  }
  {
    // T=5, C=2: final chunk holds a single frame and is padded.
    ContextSchedule sch = MakeSchedule(2, 0, 5);
    Tensor x = RandFeatures(rng, 5, 2);
    Tensor v, mask;
    bool padded = false;
    est.ChunkTargets(x, sch, &v, &mask, &padded);
    CHECK(v.Dim(0) == 2);
    CHECK(padded);
    CHECK(v.At(1, 0) == x.At(4, 0));
    CHECK(v.At(1, 1) == x.At(4, 1));
    CHECK(v.At(1, 2) == 0.0);
    CHECK(v.At(1, 3) == 0.0);
    CHECK(mask.At(1, 0) == 1.0);
    CHECK(mask.At(1, 2) == 0.0);
  }
}

TEST_CASE("LSTM predictor has the prefix property") {
  Rng rng(28);
  ParamSet ps;
  FoCCENet est(TinyEstimator(2), &ps, "omega", rng);
  ad::Tape tape;
  Mounted m = MountParams(tape, ps, false);
  Tensor a = est.Predict(m, {1, 2, 3}).Value();
  Tensor b = est.Predict(m, {1, 2, 3, 1}).Value();
  for (int u = 0; u <= 3; ++u)
    for (int j = 0; j < a.Dim(1); ++j) CHECK(a.At(u, j) == b.At(u, j));

  // Unlike the stateless predictor, the full prefix matters.
  Tensor c = est.Predict(m, {2, 2, 3}).Value();
  double diff = 0.0;
  for (int j = 0; j < a.Dim(1); ++j) diff += std::abs(a.At(3, j) - c.At(3, j));
  CHECK(diff > 1e-10);
  CHECK_THROWS_AS(est.Predict(m, {4}), ContractError);
}

TEST_CASE("estimator encoder is chunk-causal at the bit level") {
  Rng rng(29);
  ParamSet ps;
  FoCCENet est(TinyEstimator(3), &ps, "omega", rng);
  int T = 9;
  ContextSchedule sch = MakeSchedule(3, 0, T);
  for (int probe = 0; probe < 10; ++probe) {
    Tensor x = RandFeatures(rng, T, 2);
    int frame = 2 + rng.Int(T - 2);
    Tensor x2 = x;
    x2.At(frame - 1, rng.Int(2)) -= 2.0;
    ad::Tape t1, t2;
    Mounted m1 = MountParams(t1, ps, false);
    Mounted m2 = MountParams(t2, ps, false);
    Tensor f1 = est.Encode(m1, x, sch).Value();
    Tensor f2 = est.Encode(m2, x2, sch).Value();
    for (int t = 1; t <= T; ++t) {
      if (sch.E(t) >= frame) continue;
      for (int j = 0; j < f1.Dim(1); ++j) CHECK(f1.At(t - 1, j) == f2.At(t - 1, j));
    }
  }
}

TEST_CASE("fresh estimator has log gamma exactly zero") {
  // At identity flow initialization the condition has no effect on the
  // density, so chi and chi_bar agree and every compensation weight is 1.
  Rng rng(30);
  ParamSet ps;
  FoCCENet est(TinyEstimator(2), &ps, "omega", rng);
  ContextSchedule sch = MakeSchedule(2, 0, 6);
  Tensor x = RandFeatures(rng, 6, 2);
  ad::Tape tape;
  Mounted m = MountParams(tape, ps, false);
  FoCCENet::Densities d = est.ChiDensities(m, x, {1, 2}, sch);
  FoCCTable gamma = est.BuildGamma(m, d, sch, 2);
  const Tensor &rows = gamma.log_gamma_rows.Value();
  for (int64_t i = 0; i < rows.NumEl(); ++i) CHECK(rows[i] == 0.0);
}

TEST_CASE("gamma rows implement the tempered log ratio") {
  Rng rng(31);
  ParamSet ps;
  FoCCENetConfig cfg = TinyEstimator(2);
  cfg.lambda_gamma = 0.05;
  FoCCENet est(cfg, &ps, "omega", rng);
  ContextSchedule sch = MakeSchedule(2, 0, 4);

  ad::Tape tape;
  Mounted m = MountParams(tape, ps, false);
  FoCCENet::Densities d;
  d.boundary_frames = sch.BoundaryFrames();
  d.log_chi_bar = tape.Constant(Tensor({1}, {-1.0}));
  d.log_chi = tape.Constant(Tensor({1, 2}, {1.0, -3.5}));
  FoCCTable g = est.BuildGamma(m, d, sch, 1);
  const Tensor &rows = g.log_gamma_rows.Value();
  CHECK(rows[0] == 0.05 * 2.0);    // log chi - log chi_bar = 2.0
  CHECK(rows[1] == 0.05 * -2.5);
}

TEST_CASE("estimator objective modes and degenerate inputs") {
  Rng rng(32);
  ParamSet ps;
  FoCCENetConfig cfg = TinyEstimator(2);
  FoCCENet est(cfg, &ps, "omega", rng);
  ContextSchedule sch = MakeSchedule(2, 0, 4);  // single boundary frame t=2
  Tensor x = RandFeatures(rng, 4, 2);

  ad::Tape tape;
  Mounted m = MountParams(tape, ps);
  FoCCENet::Densities d = est.ChiDensities(m, x, {2}, sch);
  CHECK(d.boundary_frames.size() == 1);
  double bar = d.log_chi_bar.Value()[0];
  double chi1 = d.log_chi.Value()[1];  // u = 1 entry of the [1,2] matrix
  double obj = est.Objective(m, d, 1).Value()[0];
  CHECK(std::abs(obj - (bar + chi1)) <= 1e-12);

  // U = 0 keeps only the unconditional term.
  FoCCENet::Densities d0 = est.ChiDensities(m, x, {}, sch);
  CHECK(std::abs(est.Objective(m, d0, 0).Value()[0] -
                 d0.log_chi_bar.Value()[0]) <= 1e-12);

  // Literal mode sums raw densities.
  ParamSet ps2;
  Rng rng2(32);
  FoCCENetConfig lit = cfg;
  lit.literal_objective = true;
  FoCCENet est2(lit, &ps2, "omega", rng2);
  ad::Tape tape2;
  Mounted m2 = MountParams(tape2, ps2);
  FoCCENet::Densities dl = est2.ChiDensities(m2, x, {2}, sch);
  double lobj = est2.Objective(m2, dl, 1).Value()[0];
  CHECK(std::abs(lobj - (std::exp(bar) + std::exp(chi1))) <= 1e-12);

  // Empty boundary set: zero objective, zero gradients everywhere.
  ContextSchedule whole = MakeSchedule(8, 0, 4);
  CHECK(whole.BoundaryFrames().empty());
  ad::Tape tape3;
  Mounted m3 = MountParams(tape3, ps);
  FoCCENet::Densities de = est.ChiDensities(m3, x, {2}, whole);
  ad::Var obj3 = est.Objective(m3, de, 1);
  CHECK(obj3.Value()[0] == 0.0);
  tape3.Backward(obj3);
  for (const Tensor &g : CollectGrads(tape3, m3))
    for (int64_t i = 0; i < g.NumEl(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("estimator objective gradients match finite differences") {
  Rng rng(33);
  ParamSet ps;
  FoCCENet est(TinyEstimator(2), &ps, "omega", rng);
  // Perturb flow output layers away from identity so the test is not run
  // at a stationary construction.
  for (int h = 0; h < ps.Size(); ++h) {
    Tensor &t = ps.Value(h);
    for (int64_t i = 0; i < t.NumEl(); ++i) t[i] += 0.1 * rng.Normal();
  }
  ContextSchedule sch = MakeSchedule(2, 0, 5);  // includes a padded chunk
  Tensor x = RandFeatures(rng, 5, 2);
  std::vector<int> y = {1, 3};

  ad::Tape tape;
  Mounted m = MountParams(tape, ps);
  ad::Var obj = est.Objective(m, est.ChiDensities(m, x, y, sch), 2);
  tape.Backward(obj);
  std::vector<Tensor> grads = CollectGrads(tape, m);

  CheckParamGrads(ps, grads, [&](const ParamSet &p) {
    ad::Tape t;
    Mounted mm = MountParams(t, p, false);
    return est.Objective(mm, est.ChiDensities(mm, x, y, sch), 2).Value()[0];
  }, 1e-4);
}

TEST_CASE("modified likelihood: theta gradients real, omega gradients zero") {
  Rng rng(34);
  ParamSet theta, omega;
  TransducerNet net(TinyTransducer(), &theta, "theta", rng);
  FoCCENet est(TinyEstimator(2), &omega, "omega", rng);
  for (int h = 0; h < omega.Size(); ++h) {
    Tensor &t = omega.Value(h);
    for (int64_t i = 0; i < t.NumEl(); ++i) t[i] += 0.15 * rng.Normal();
  }
  int T = 4;
  ContextSchedule sch = MakeSchedule(2, 0, T);
  Tensor x = RandFeatures(rng, T, 2);
  std::vector<int> y = {2, 1};

  ad::Tape tape;
  Mounted mt = MountParams(tape, theta);
  Mounted mo = MountParams(tape, omega);
  LocalProbTable table = net.BuildProbTable(mt, x, y, sch);
  FoCCENet::Densities d = est.ChiDensities(mo, x, y, sch);
  FoCCTable gamma = est.BuildGamma(mo, d, sch, 2);
  ad::Var lmod = ModifiedLikelihood(table, sch, gamma, /*detach_focc=*/true);
  tape.Backward(lmod);

  std::vector<Tensor> gtheta = CollectGrads(tape, mt);
  double total = 0.0;
  for (const Tensor &g : gtheta)
    for (int64_t i = 0; i < g.NumEl(); ++i) total += std::abs(g[i]);
  CHECK(total > 1e-6);

  for (const Tensor &g : CollectGrads(tape, mo))
    for (int64_t i = 0; i < g.NumEl(); ++i) CHECK(g[i] == 0.0);

  // Theta gradients of the modified likelihood agree with finite
  // differences; gamma values are held fixed by the stop-gradient but theta
  // does not feed them anyway.
  CheckParamGrads(theta, gtheta, [&](const ParamSet &p) {
    ad::Tape t;
    Mounted mt2 = MountParams(t, p, false);
    Mounted mo2 = MountParams(t, omega, false);
    LocalProbTable tb = net.BuildProbTable(mt2, x, y, sch);
    FoCCENet::Densities dd = est.ChiDensities(mo2, x, y, sch);
    return ModifiedLikelihood(tb, sch, est.BuildGamma(mo2, dd, sch, 2), true)
        .Value()[0];
  }, 1e-4);

  // The estimator objective on the same tape leaves theta untouched.
  ad::Tape tape2;
  Mounted mt3 = MountParams(tape2, theta);
  Mounted mo3 = MountParams(tape2, omega);
  net.BuildProbTable(mt3, x, y, sch);  // theta nodes present on the tape
  ad::Var obj = est.Objective(mo3, est.ChiDensities(mo3, x, y, sch), 2);
  tape2.Backward(obj);
  for (const Tensor &g : CollectGrads(tape2, mt3))
    for (int64_t i = 0; i < g.NumEl(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("schedule chunk size must match the estimator's flow") {
  Rng rng(35);
  ParamSet ps;
  FoCCENet est(TinyEstimator(2), &ps, "omega", rng);
  ad::Tape tape;
  Mounted m = MountParams(tape, ps, false);
  Tensor x = RandFeatures(rng, 6, 2);
  CHECK_THROWS_AS(est.ChiDensities(m, x, {1}, MakeSchedule(3, 0, 6)),
                  ContractError);
}

}  // namespace
}  // namespace focce
