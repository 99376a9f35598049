// focce/test_flow.cc
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
#include <vector>

#include "focce/flow.h"
#include "focce/params.h"
#include "focce/rng.h"

namespace focce {
namespace {

// Adds noise to every parameter (including the zero-initialized final
// layers) so the flow is away from identity.
void PerturbParams(ParamSet *ps, Rng &rng, double scale) {
  for (int h = 0; h < ps->Size(); ++h) {
    Tensor &t = ps->Value(h);
    for (int64_t i = 0; i < t.NumEl(); ++i) t[i] += scale * rng.Normal();
  }
}

Tensor RandVec(Rng &rng, int d, double scale = 1.0) {
  Tensor t({d});
  for (int i = 0; i < d; ++i) t[i] = scale * rng.Normal();
  return t;
}

double Det(std::vector<std::vector<double>> a) {
  const int n = static_cast<int>(a.size());
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (a[p][c] == 0.0) return 0.0;
    if (p != c) {
      std::swap(a[p], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (int r = c + 1; r < n; ++r) {
      double f = a[r][c] / a[c][c];
      for (int k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

TEST_CASE("fresh flow is the standard Gaussian prior") {
  Rng rng(1);
  for (int cond_dim : {0, 3}) {
    ParamSet ps;
    FlowConfig cfg;
    cfg.dim = 2;
    cfg.cond_dim = cond_dim;
    cfg.hidden = 160;
    cfg.depth = 1;
    cfg.blocks = 2;
    Maf flow(cfg, &ps, "flow", rng);
    Tensor v({2});
    Tensor cond = cond_dim > 0 ? RandVec(rng, cond_dim) : Tensor();
    double lp = flow.LogDensityValue(ps, v, cond);
    CHECK(std::abs(lp - (-1.8378770664)) <= 1e-6);

    ad::Tape tape;
    Mounted m = MountParams(tape, ps);
    ad::Var vv = tape.Constant(Tensor({1, 2}));
    ad::Var cv = cond_dim > 0
                     ? tape.Constant(Tensor({1, cond_dim},
                                            std::vector<double>(
                                                cond.Data(),
                                                cond.Data() + cond_dim)))
                     : ad::Var{};
    ad::Var lpr = flow.LogDensityRows(m, vv, cv);
    CHECK(std::abs(lpr.Value()[0] - lp) <= 1e-12);
  }
}

TEST_CASE("round-trip over random points, conditions, and configurations") {
  Rng rng(2);
  int checked = 0;
  for (int depth : {1, 2}) {
    for (int blocks : {1, 2}) {
      for (int d : {1, 2, 3, 5}) {
        for (int cond_dim : {0, 3}) {
          ParamSet ps;
          FlowConfig cfg;
          cfg.dim = d;
          cfg.cond_dim = cond_dim;
          cfg.hidden = 12;
          cfg.depth = depth;
          cfg.blocks = blocks;
          Maf flow(cfg, &ps, "flow", rng);
          PerturbParams(&ps, rng, 0.4);
          for (int trial = 0; trial < 4; ++trial) {
            Tensor cond =
                cond_dim > 0 ? RandVec(rng, cond_dim) : Tensor();
            Tensor v = RandVec(rng, d, 1.5);
            Maf::ForwardResult f = flow.ForwardValues(ps, v, cond);
            Tensor back = flow.Inverse(ps, f.z, cond);
            for (int i = 0; i < d; ++i)
              CHECK(std::abs(back[i] - v[i]) <= 1e-8);

            Tensor z = RandVec(rng, d);
            Tensor sample = flow.Inverse(ps, z, cond);
            Maf::ForwardResult f2 = flow.ForwardValues(ps, sample, cond);
            for (int i = 0; i < d; ++i)
              CHECK(std::abs(f2.z[i] - z[i]) <= 1e-8);
            ++checked;
          }
        }
      }
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("log-determinant matches a numerical Jacobian") {
  Rng rng(3);
  for (int depth : {1, 2}) {
    for (int d : {1, 2, 3, 4}) {
      ParamSet ps;
      FlowConfig cfg;
      cfg.dim = d;
      cfg.cond_dim = 2;
      cfg.hidden = 10;
      cfg.depth = depth;
      cfg.blocks = 2;
      Maf flow(cfg, &ps, "flow", rng);
      PerturbParams(&ps, rng, 0.4);
      for (int trial = 0; trial < 5; ++trial) {
        Tensor cond = RandVec(rng, 2);
        Tensor v = RandVec(rng, d, 1.2);
        Maf::ForwardResult f = flow.ForwardValues(ps, v, cond);
        const double step = 1e-6;
        std::vector<std::vector<double>> jac(d, std::vector<double>(d));
        for (int j = 0; j < d; ++j) {
          Tensor plus = v, minus = v;
          plus[j] += step;
          minus[j] -= step;
          Tensor zp = flow.ForwardValues(ps, plus, cond).z;
          Tensor zm = flow.ForwardValues(ps, minus, cond).z;
          for (int i = 0; i < d; ++i)
            jac[i][j] = (zp[i] - zm[i]) / (2 * step);
        }
        if (depth == 1) {
          // Natural-order autoregression: strictly no dependence on later
          // dimensions.
          for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j)
              CHECK(std::abs(jac[i][j]) <= 1e-9);
        }
        double num = std::log(std::abs(Det(jac)));
        CHECK(std::abs(num - f.log_det) /
                  std::max(1.0, std::abs(f.log_det)) <=
              1e-5);
      }
    }
  }
}

TEST_CASE("density integrates to one") {
  Rng rng(4);
  {
    ParamSet ps;
    FlowConfig cfg;
    cfg.dim = 1;
    cfg.cond_dim = 2;
    cfg.hidden = 8;
    cfg.depth = 1;
    cfg.blocks = 2;
    Maf flow(cfg, &ps, "flow", rng);
    PerturbParams(&ps, rng, 0.25);
    Tensor cond = RandVec(rng, 2);
    const double lo = -8.0, hi = 8.0, h = 0.01;
    double mass = 0.0;
    Tensor v({1});
    for (double x = lo; x <= hi; x += h) {
      v[0] = x;
      mass += std::exp(flow.LogDensityValue(ps, v, cond)) * h;
    }
    CHECK(std::abs(mass - 1.0) <= 2e-2);
  }
  {
    ParamSet ps;
    FlowConfig cfg;
    cfg.dim = 2;
    cfg.cond_dim = 0;
    cfg.hidden = 8;
    cfg.depth = 2;
    cfg.blocks = 2;
    Maf flow(cfg, &ps, "flow", rng);
    PerturbParams(&ps, rng, 0.25);
    const double lo = -8.0, hi = 8.0, h = 0.08;
    double mass = 0.0;
    Tensor v({2});
    for (double x = lo; x <= hi; x += h) {
      for (double y = lo; y <= hi; y += h) {
        v[0] = x;
        v[1] = y;
        mass += std::exp(flow.LogDensityValue(ps, v, Tensor())) * h * h;
      }
    }
    CHECK(std::abs(mass - 1.0) <= 2e-2);
  }
}

TEST_CASE("masked density is the exact prefix marginal") {
  Rng rng(5);
  ParamSet ps;
  FlowConfig cfg;
  cfg.dim = 3;
  cfg.cond_dim = 2;
  cfg.hidden = 8;
  cfg.depth = 1;
  cfg.blocks = 2;
  Maf flow(cfg, &ps, "flow", rng);
  PerturbParams(&ps, rng, 0.25);
  Tensor cond_row({1, 2}, {0.3, -0.7});
  Tensor mask({1, 3}, {1.0, 1.0, 0.0});

  auto masked_lp = [&](double a, double b, double pad) {
    ad::Tape tape;
    Mounted m = MountParams(tape, ps);
    ad::Var v = tape.Constant(Tensor({1, 3}, {a, b, pad}));
    ad::Var c = tape.Constant(cond_row);
    return flow.LogDensityRows(m, v, c, &mask).Value()[0];
  };

  // Padded dimensions cannot influence the result.
  Rng probe(6);
  for (int trial = 0; trial < 20; ++trial) {
    double a = probe.Normal(), b = probe.Normal();
    double l1 = masked_lp(a, b, 0.0);
    double l2 = masked_lp(a, b, 13.5 * probe.Normal());
    CHECK(std::abs(l1 - l2) <= 1e-12);
  }

  // The masked density is normalized over the unpadded sub-dimensions.
  const double lo = -8.0, hi = 8.0, h = 0.08;
  double mass = 0.0;
  for (double x = lo; x <= hi; x += h)
    for (double y = lo; y <= hi; y += h)
      mass += std::exp(masked_lp(x, y, 0.0)) * h * h;
  CHECK(std::abs(mass - 1.0) <= 2e-2);

  ad::Tape tape;
  CHECK_THROWS_AS(
      [&] {
        FlowConfig deep = cfg;
        deep.depth = 2;
        ParamSet ps2;
        Rng r2(7);
        Maf f2(deep, &ps2, "flow", r2);
        Mounted m = MountParams(tape, ps2);
        ad::Var v = tape.Constant(Tensor({1, 3}));
        ad::Var c = tape.Constant(Tensor({1, 2}));
        f2.LogDensityRows(m, v, c, &mask);
      }(),
      ContractError);
}

TEST_CASE("flow gradients match finite differences") {
  Rng rng(8);
  ParamSet ps;
  FlowConfig cfg;
  cfg.dim = 3;
  cfg.cond_dim = 2;
  cfg.hidden = 6;
  cfg.depth = 2;
  cfg.blocks = 2;
  Maf flow(cfg, &ps, "flow", rng);
  PerturbParams(&ps, rng, 0.3);

  const int n = 4;
  Tensor v({n, 3}), cond({n, 2});
  for (int64_t i = 0; i < v.NumEl(); ++i) v[i] = rng.Normal();
  for (int64_t i = 0; i < cond.NumEl(); ++i) cond[i] = rng.Normal();

  auto eval = [&](const ParamSet &p, const Tensor &vv, const Tensor &cc) {
    ad::Tape tape;
    Mounted m = MountParams(tape, p, /*requires_grad=*/false);
    ad::Var lp = flow.LogDensityRows(m, tape.Constant(vv), tape.Constant(cc));
    return ad::Sum(lp).Value()[0];
  };

  ad::Tape tape;
  Mounted m = MountParams(tape, ps);
  ad::Var vv = tape.Leaf(v, true);
  ad::Var cc = tape.Leaf(cond, true);
  ad::Var root = ad::Sum(flow.LogDensityRows(m, vv, cc));
  tape.Backward(root);

  const double step = 1e-5;
  for (int h = 0; h < ps.Size(); ++h) {
    const Tensor &g = tape.GradOf(m[h]);
    for (int64_t i = 0; i < g.NumEl(); ++i) {
      ParamSet plus = ps, minus = ps;
      plus.Value(h)[i] += step;
      minus.Value(h)[i] -= step;
      double fd = (eval(plus, v, cond) - eval(minus, v, cond)) / (2 * step);
      CHECK(std::abs(g[i] - fd) /
                std::max({1.0, std::abs(g[i]), std::abs(fd)}) <=
            1e-4);
    }
  }
  const Tensor &gv = tape.GradOf(vv);
  for (int64_t i = 0; i < v.NumEl(); ++i) {
    Tensor plus = v, minus = v;
    plus[i] += step;
    minus[i] -= step;
    double fd = (eval(ps, plus, cond) - eval(ps, minus, cond)) / (2 * step);
    CHECK(std::abs(gv[i] - fd) /
              std::max({1.0, std::abs(gv[i]), std::abs(fd)}) <=
          1e-4);
  }
}

TEST_CASE("conditioning separates a bimodal target") {
  Rng rng(9);
  ParamSet ps;
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.cond_dim = 2;
  cfg.hidden = 16;
  cfg.depth = 1;
  cfg.blocks = 2;
  Maf flow(cfg, &ps, "flow", rng);

  auto sample = [&](Rng &r, int mode, Tensor *v, Tensor *c) {
    *c = Tensor({2});
    (*c)[mode] = 1.0;
    *v = Tensor({2});
    double sign = mode == 0 ? 1.0 : -1.0;
    (*v)[0] = sign * 1.5 + 0.3 * r.Normal();
    (*v)[1] = -sign * 1.5 + 0.3 * r.Normal();
  };

  AdamOptimizer opt(0.01);
  const int batch = 64;
  for (int step = 0; step < 400; ++step) {
    Tensor v({batch, 2}), c({batch, 2});
    for (int b = 0; b < batch; ++b) {
      Tensor vb, cb;
      sample(rng, rng.Int(2), &vb, &cb);
      v.At(b, 0) = vb[0];
      v.At(b, 1) = vb[1];
      c.At(b, 0) = cb[0];
      c.At(b, 1) = cb[1];
    }
    ad::Tape tape;
    Mounted m = MountParams(tape, ps);
    ad::Var loss = ad::Scale(
        ad::Sum(flow.LogDensityRows(m, tape.Constant(v), tape.Constant(c))),
        -1.0 / batch);
    tape.Backward(loss);
    std::vector<Tensor> grads = CollectGrads(tape, m);
    ClipByGlobalNorm(&grads, 5.0);
    opt.Step(&ps, grads);
  }

  Rng eval_rng(10);
  double match = 0.0, mismatch = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    int mode = eval_rng.Int(2);
    Tensor v, c;
    sample(eval_rng, mode, &v, &c);
    Tensor wrong({2});
    wrong[1 - mode] = 1.0;
    match += flow.LogDensityValue(ps, v, c);
    mismatch += flow.LogDensityValue(ps, v, wrong);
  }
  CHECK(match / n > mismatch / n);
}

TEST_CASE("maximum likelihood reaches the Gaussian entropy optimum") {
  Rng rng(11);
  ParamSet ps;
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.cond_dim = 0;
  cfg.hidden = 8;
  cfg.depth = 1;
  cfg.blocks = 2;
  Maf flow(cfg, &ps, "flow", rng);

  const double sigma = 0.5;
  AdamOptimizer opt(0.02);
  const int batch = 128;
  for (int step = 0; step < 400; ++step) {
    Tensor v({batch, 2});
    for (int64_t i = 0; i < v.NumEl(); ++i) v[i] = sigma * rng.Normal();
    ad::Tape tape;
    Mounted m = MountParams(tape, ps);
    ad::Var loss = ad::Scale(
        ad::Sum(flow.LogDensityRows(m, tape.Constant(v), ad::Var{})),
        -1.0 / batch);
    tape.Backward(loss);
    std::vector<Tensor> grads = CollectGrads(tape, m);
    ClipByGlobalNorm(&grads, 5.0);
    opt.Step(&ps, grads);
  }

  // Differential entropy of N(0, sigma^2 I): average log-density of samples
  // under the true model is -(d/2) ln(2 pi e sigma^2).
  const double optimum = -std::log(2.0 * M_PI * M_E * sigma * sigma);
  Rng eval_rng(12);
  double avg = 0.0;
  const int n = 4000;
  Tensor v({2});
  for (int i = 0; i < n; ++i) {
    v[0] = sigma * eval_rng.Normal();
    v[1] = sigma * eval_rng.Normal();
    avg += flow.LogDensityValue(ps, v, Tensor());
  }
  avg /= n;
  CHECK(std::abs(avg - optimum) <= 0.05 * std::abs(optimum));
}

}  // namespace
}  // namespace focce
