// focce/autodiff.cc
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

#include "focce/autodiff.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "focce/common.h"

namespace focce {
namespace ad {

const Tensor &Var::Value() const {
  FOCCE_CHECK(tape != nullptr);
  return tape->ValueOf(id);
}

bool Var::RequiresGrad() const {
  FOCCE_CHECK(tape != nullptr);
  return tape->NodeRequiresGrad(id);
}

Var Tape::Leaf(Tensor value, bool requires_grad) {
  FOCCE_CHECK_MSG(!value.Empty(), "leaf tensor is empty");
  nodes_.push_back(Node{std::move(value), BackwardFn(), requires_grad});
  return Var{this, static_cast<int32_t>(nodes_.size()) - 1};
}

Var Tape::Record(Tensor value, std::initializer_list<Var> parents,
                 BackwardFn backward) {
  return Record(std::move(value),
                std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::Record(Tensor value, std::span<const Var> parents,
                 BackwardFn backward) {
  bool req = false;
  for (const Var &p : parents) {
    FOCCE_CHECK_MSG(p.tape == this, "operands recorded on different tapes");
    req = req || nodes_[p.id].requires_grad;
  }
  if (!req) backward = BackwardFn();
  nodes_.push_back(Node{std::move(value), std::move(backward), req});
  return Var{this, static_cast<int32_t>(nodes_.size()) - 1};
}

void Tape::Backward(const Var &root) {
  FOCCE_CHECK_MSG(root.tape == this, "backward root from another tape");
  FOCCE_CHECK_MSG(nodes_[root.id].value.NumEl() == 1,
                  "backward root must be scalar");
  grads_.assign(nodes_.size(), Tensor());
  Tensor seed(nodes_[root.id].value.Shape());
  seed[0] = 1.0;
  grads_[root.id] = std::move(seed);
  // Nodes are in evaluation order, so a strict reverse sweep sees every
  // consumer before its producers. Gradient accumulation order is therefore
  // a pure function of the recorded graph, which keeps runs bit-reproducible.
  for (int32_t id = root.id; id >= 0; --id) {
    Node &n = nodes_[id];
    if (!n.requires_grad || !n.backward) continue;
    if (grads_[id].Empty()) continue;  // no gradient reached this node
    n.backward(*this, id);
  }
}

const Tensor &Tape::GradOf(const Var &v) {
  FOCCE_CHECK(v.tape == this);
  FOCCE_CHECK_MSG(!grads_.empty(), "GradOf called before Backward");
  Tensor &g = grads_[v.id];
  if (g.Empty()) g = Tensor(nodes_[v.id].value.Shape());
  return g;
}

Tensor *Tape::MaybeGrad(int32_t id) {
  Node &n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  Tensor &g = grads_[id];
  if (g.Empty()) g = Tensor(n.value.Shape());
  return &g;
}

std::vector<Tensor> Gradients(const Var &root, std::span<const Var> params) {
  FOCCE_CHECK(root.tape != nullptr);
  root.tape->Backward(root);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Var &p : params) out.push_back(root.tape->GradOf(p));
  return out;
}

namespace {

Tape *SameTape(const Var &a, const Var &b) {
  FOCCE_CHECK_MSG(a.tape != nullptr && a.tape == b.tape,
                  "operands on different tapes");
  return a.tape;
}

// Broadcast policy for binary elementwise ops: equal shapes, or one side has
// a single element and is applied against every element of the other.
enum class Bc : int8_t { kSame, kLeftScalar, kRightScalar };

Bc BroadcastKind(const Tensor &a, const Tensor &b, const char *op) {
  if (a.SameShape(b)) return Bc::kSame;
  if (a.IsScalarLike()) return Bc::kLeftScalar;
  if (b.IsScalarLike()) return Bc::kRightScalar;
  FOCCE_CHECK_MSG(false, std::string(op) + ": incompatible shapes " +
                             a.ShapeString() + " and " + b.ShapeString());
  return Bc::kSame;  // unreachable
}

inline int64_t L(Bc k, int64_t i) { return k == Bc::kLeftScalar ? 0 : i; }
inline int64_t R(Bc k, int64_t i) { return k == Bc::kRightScalar ? 0 : i; }

const std::vector<int> &OutShape(Bc k, const Tensor &a, const Tensor &b) {
  return k == Bc::kLeftScalar ? b.Shape() : a.Shape();
}

// Stable log(exp(x) + exp(y)); kLogZero is the additive identity.
inline double Lae(double x, double y) {
  if (x == kLogZero) return y;
  if (y == kLogZero) return x;
  double hi = std::max(x, y), lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

Var Add(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  Bc k = BroadcastKind(av, bv, "Add");
  Tensor out(OutShape(k, av, bv));
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = av[L(k, i)] + bv[R(k, i)];
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, k](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const int64_t n = g.NumEl();
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      if (k == Bc::kLeftScalar) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += g[i];
        (*ga)[0] += s;
      } else {
        for (int64_t i = 0; i < n; ++i) (*ga)[i] += g[i];
      }
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      if (k == Bc::kRightScalar) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += g[i];
        (*gb)[0] += s;
      } else {
        for (int64_t i = 0; i < n; ++i) (*gb)[i] += g[i];
      }
    }
  });
}

Var Sub(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  Bc k = BroadcastKind(av, bv, "Sub");
  Tensor out(OutShape(k, av, bv));
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = av[L(k, i)] - bv[R(k, i)];
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, k](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const int64_t n = g.NumEl();
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      if (k == Bc::kLeftScalar) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += g[i];
        (*ga)[0] += s;
      } else {
        for (int64_t i = 0; i < n; ++i) (*ga)[i] += g[i];
      }
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      if (k == Bc::kRightScalar) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += g[i];
        (*gb)[0] -= s;
      } else {
        for (int64_t i = 0; i < n; ++i) (*gb)[i] -= g[i];
      }
    }
  });
}

Var Mul(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  Bc k = BroadcastKind(av, bv, "Mul");
  Tensor out(OutShape(k, av, bv));
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = av[L(k, i)] * bv[R(k, i)];
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, k](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const Tensor &av = tp.ValueOf(ai), &bv = tp.ValueOf(bi);
    const int64_t n = g.NumEl();
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int64_t i = 0; i < n; ++i) (*ga)[L(k, i)] += g[i] * bv[R(k, i)];
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      for (int64_t i = 0; i < n; ++i) (*gb)[R(k, i)] += g[i] * av[L(k, i)];
    }
  });
}

Var Div(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  Bc k = BroadcastKind(av, bv, "Div");
  Tensor out(OutShape(k, av, bv));
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = av[L(k, i)] / bv[R(k, i)];
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, k](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const Tensor &av = tp.ValueOf(ai), &bv = tp.ValueOf(bi);
    const int64_t n = g.NumEl();
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int64_t i = 0; i < n; ++i) (*ga)[L(k, i)] += g[i] / bv[R(k, i)];
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      for (int64_t i = 0; i < n; ++i) {
        double d = bv[R(k, i)];
        (*gb)[R(k, i)] -= g[i] * av[L(k, i)] / (d * d);
      }
    }
  });
}

Var LogAddExp(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  Bc k = BroadcastKind(av, bv, "LogAddExp");
  Tensor out(OutShape(k, av, bv));
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = Lae(av[L(k, i)], bv[R(k, i)]);
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, k](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const Tensor &ov = tp.ValueOf(self);
    const Tensor &av = tp.ValueOf(ai), &bv = tp.ValueOf(bi);
    const int64_t n = g.NumEl();
    Tensor *ga = tp.MaybeGrad(ai);
    Tensor *gb = tp.MaybeGrad(bi);
    for (int64_t i = 0; i < n; ++i) {
      if (ov[i] == kLogZero) continue;  // both sides were log-zero
      if (ga != nullptr && av[L(k, i)] != kLogZero)
        (*ga)[L(k, i)] += g[i] * std::exp(av[L(k, i)] - ov[i]);
      if (gb != nullptr && bv[R(k, i)] != kLogZero)
        (*gb)[R(k, i)] += g[i] * std::exp(bv[R(k, i)] - ov[i]);
    }
  });
}

namespace {

// Shared scaffolding for unary elementwise ops whose backward multiplies the
// output gradient by a locally computed factor.
template <typename Fwd, typename BwdFactor>
Var UnaryOp(Var a, Fwd fwd, BwdFactor factor) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  Tensor out(av.Shape());
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  const int32_t ai = a.id;
  return a.tape->Record(
      std::move(out), {a}, [ai, factor](Tape &tp, int32_t self) {
        Tensor *ga = tp.MaybeGrad(ai);
        if (ga == nullptr) return;
        const Tensor &g = tp.OutGrad(self);
        const Tensor &av = tp.ValueOf(ai);
        const Tensor &ov = tp.ValueOf(self);
        const int64_t n = g.NumEl();
        for (int64_t i = 0; i < n; ++i) (*ga)[i] += g[i] * factor(av[i], ov[i]);
      });
}

}  // namespace

Var Neg(Var a) {
  return UnaryOp(
      a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Var Exp(Var a) {
  return UnaryOp(
      a, [](double x) { return std::exp(x); },
      [](double, double o) { return o; });
}

Var Log(Var a, bool allow_zero) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  Tensor out(av.Shape());
  const int64_t n = out.NumEl();
  for (int64_t i = 0; i < n; ++i) {
    double x = av[i];
    if (x > 0.0) {
      out[i] = std::log(x);
    } else if (x == 0.0 && allow_zero) {
      out[i] = kLogZero;
    } else {
      FOCCE_CHECK_MSG(false, "Log of non-positive value");
    }
  }
  const int32_t ai = a.id;
  return a.tape->Record(std::move(out), {a}, [ai](Tape &tp, int32_t self) {
    Tensor *ga = tp.MaybeGrad(ai);
    if (ga == nullptr) return;
    const Tensor &g = tp.OutGrad(self);
    const Tensor &av = tp.ValueOf(ai);
    const int64_t n = g.NumEl();
    for (int64_t i = 0; i < n; ++i) {
      if (av[i] > 0.0) (*ga)[i] += g[i] / av[i];
    }
  });
}

Var Tanh(Var a) {
  return UnaryOp(
      a, [](double x) { return std::tanh(x); },
      [](double, double o) { return 1.0 - o * o; });
}

Var Relu(Var a) {
  return UnaryOp(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Sigmoid(Var a) {
  return UnaryOp(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Var PowConst(Var a, double p) {
  return UnaryOp(
      a, [p](double x) { return std::pow(x, p); },
      [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var Scale(Var a, double c) {
  return UnaryOp(
      a, [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Var AddConst(Var a, double c) {
  return UnaryOp(
      a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Var Matmul(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2 && bv.Rank() == 2 && av.Dim(1) == bv.Dim(0),
                  "Matmul of shapes " + av.ShapeString() + " and " +
                      bv.ShapeString());
  const int m = av.Dim(0), kk = av.Dim(1), nn = bv.Dim(1);
  Tensor out({m, nn});
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < kk; ++l) {
      double x = av.At(i, l);
      if (x == 0.0) continue;
      for (int j = 0; j < nn; ++j) out.At(i, j) += x * bv.At(l, j);
    }
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const Tensor &av = tp.ValueOf(ai), &bv = tp.ValueOf(bi);
    const int m = av.Dim(0), kk = av.Dim(1), nn = bv.Dim(1);
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < kk; ++l) {
          double s = 0.0;
          for (int j = 0; j < nn; ++j) s += g.At(i, j) * bv.At(l, j);
          ga->At(i, l) += s;
        }
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      for (int l = 0; l < kk; ++l)
        for (int j = 0; j < nn; ++j) {
          double s = 0.0;
          for (int i = 0; i < m; ++i) s += av.At(i, l) * g.At(i, j);
          gb->At(l, j) += s;
        }
    }
  });
}

Var Sum(Var a) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  double s = 0.0;
  const int64_t n = av.NumEl();
  for (int64_t i = 0; i < n; ++i) s += av[i];
  const int32_t ai = a.id;
  return a.tape->Record(Tensor::Scalar(s), {a}, [ai](Tape &tp, int32_t self) {
    Tensor *ga = tp.MaybeGrad(ai);
    if (ga == nullptr) return;
    const double g = tp.OutGrad(self)[0];
    const int64_t n = ga->NumEl();
    for (int64_t i = 0; i < n; ++i) (*ga)[i] += g;
  });
}

Var Mean(Var a) {
  FOCCE_CHECK(a.tape != nullptr);
  const int64_t n = a.Value().NumEl();
  FOCCE_CHECK_MSG(n > 0, "Mean of empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(n));
}

Var RowSum(Var a) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2, "RowSum expects a matrix");
  const int n = av.Dim(0), m = av.Dim(1);
  Tensor out({n});
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += av.At(i, j);
    out[i] = s;
  }
  const int32_t ai = a.id;
  return a.tape->Record(std::move(out), {a}, [ai](Tape &tp, int32_t self) {
    Tensor *ga = tp.MaybeGrad(ai);
    if (ga == nullptr) return;
    const Tensor &g = tp.OutGrad(self);
    const int n = ga->Dim(0), m = ga->Dim(1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) ga->At(i, j) += g[i];
  });
}

Var LogSumExp(Var a, int axis) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  const int r = av.Rank();
  FOCCE_CHECK_MSG(axis >= 0 && axis < r, "LogSumExp axis out of range");
  const int red = av.Dim(axis);
  FOCCE_CHECK_MSG(red > 0, "LogSumExp over an empty axis");
  int64_t outer = 1, inner = 1;
  std::vector<int> oshape;
  for (int i = 0; i < r; ++i) {
    if (i < axis) outer *= av.Dim(i);
    if (i > axis) inner *= av.Dim(i);
    if (i != axis) oshape.push_back(av.Dim(i));
  }
  Tensor out(oshape);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      double m = kLogZero;
      for (int rr = 0; rr < red; ++rr)
        m = std::max(m, av[(o * red + rr) * inner + in]);
      double v;
      if (m == kLogZero) {
        v = kLogZero;
      } else {
        double s = 0.0;
        for (int rr = 0; rr < red; ++rr) {
          double x = av[(o * red + rr) * inner + in];
          if (x != kLogZero) s += std::exp(x - m);
        }
        v = m + std::log(s);
      }
      out[o * inner + in] = v;
    }
  }
  const int32_t ai = a.id;
  return a.tape->Record(
      std::move(out), {a}, [ai, axis](Tape &tp, int32_t self) {
        Tensor *ga = tp.MaybeGrad(ai);
        if (ga == nullptr) return;
        const Tensor &g = tp.OutGrad(self);
        const Tensor &av = tp.ValueOf(ai);
        const Tensor &ov = tp.ValueOf(self);
        const int r = av.Rank();
        const int red = av.Dim(axis);
        int64_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= av.Dim(i);
        for (int i = axis + 1; i < r; ++i) inner *= av.Dim(i);
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t in = 0; in < inner; ++in) {
            double lse = ov[o * inner + in];
            if (lse == kLogZero) continue;
            double go = g[o * inner + in];
            for (int rr = 0; rr < red; ++rr) {
              int64_t idx = (o * red + rr) * inner + in;
              if (av[idx] != kLogZero)
                (*ga)[idx] += go * std::exp(av[idx] - lse);
            }
          }
      });
}

Var LogSoftmaxRows(Var a) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2, "LogSoftmaxRows expects a matrix");
  const int n = av.Dim(0), m = av.Dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    double mx = kLogZero;
    for (int j = 0; j < m; ++j) mx = std::max(mx, av.At(i, j));
    FOCCE_CHECK_MSG(std::isfinite(mx), "log-softmax over a row with no mass");
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += std::exp(av.At(i, j) - mx);
    double lse = mx + std::log(s);
    for (int j = 0; j < m; ++j) out.At(i, j) = av.At(i, j) - lse;
  }
  const int32_t ai = a.id;
  return a.tape->Record(std::move(out), {a}, [ai](Tape &tp, int32_t self) {
    Tensor *ga = tp.MaybeGrad(ai);
    if (ga == nullptr) return;
    const Tensor &g = tp.OutGrad(self);
    const Tensor &ov = tp.ValueOf(self);
    const int n = ov.Dim(0), m = ov.Dim(1);
    for (int i = 0; i < n; ++i) {
      double rs = 0.0;
      for (int j = 0; j < m; ++j) rs += g.At(i, j);
      for (int j = 0; j < m; ++j)
        ga->At(i, j) += g.At(i, j) - std::exp(ov.At(i, j)) * rs;
    }
  });
}

Var Reshape(Var a, std::vector<int> shape) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(ShapeNumEl(shape) == av.NumEl(),
                  "Reshape from " + av.ShapeString() + " changes element count");
  Tensor out(shape);
  const int64_t n = av.NumEl();
  for (int64_t i = 0; i < n; ++i) out[i] = av[i];
  const int32_t ai = a.id;
  return a.tape->Record(std::move(out), {a}, [ai](Tape &tp, int32_t self) {
    Tensor *ga = tp.MaybeGrad(ai);
    if (ga == nullptr) return;
    const Tensor &g = tp.OutGrad(self);
    const int64_t n = g.NumEl();
    for (int64_t i = 0; i < n; ++i) (*ga)[i] += g[i];
  });
}

Var At(Var a, int64_t flat_index) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(flat_index >= 0 && flat_index < av.NumEl(),
                  "At index out of range");
  const int32_t ai = a.id;
  return a.tape->Record(Tensor::Scalar(av[flat_index]), {a},
                        [ai, flat_index](Tape &tp, int32_t self) {
                          Tensor *ga = tp.MaybeGrad(ai);
                          if (ga == nullptr) return;
                          (*ga)[flat_index] += tp.OutGrad(self)[0];
                        });
}

Var Rows(Var a, std::vector<int> row_indices) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2, "Rows expects a matrix");
  const int n = av.Dim(0), d = av.Dim(1);
  const int m = static_cast<int>(row_indices.size());
  Tensor out({m, d});
  for (int i = 0; i < m; ++i) {
    int ri = row_indices[i];
    FOCCE_CHECK_MSG(ri >= 0 && ri < n, "Rows index out of range");
    for (int j = 0; j < d; ++j) out.At(i, j) = av.At(ri, j);
  }
  const int32_t ai = a.id;
  return a.tape->Record(
      std::move(out), {a},
      [ai, idx = std::move(row_indices)](Tape &tp, int32_t self) {
        Tensor *ga = tp.MaybeGrad(ai);
        if (ga == nullptr) return;
        const Tensor &g = tp.OutGrad(self);
        const int m = g.Dim(0), d = g.Dim(1);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < d; ++j) ga->At(idx[i], j) += g.At(i, j);
      });
}

Var Cols(Var a, std::vector<int> col_indices) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2, "Cols expects a matrix");
  const int n = av.Dim(0), m = av.Dim(1);
  const int kk = static_cast<int>(col_indices.size());
  Tensor out({n, kk});
  for (int j = 0; j < kk; ++j)
    FOCCE_CHECK_MSG(col_indices[j] >= 0 && col_indices[j] < m,
                    "Cols index out of range");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < kk; ++j) out.At(i, j) = av.At(i, col_indices[j]);
  const int32_t ai = a.id;
  return a.tape->Record(
      std::move(out), {a},
      [ai, idx = std::move(col_indices)](Tape &tp, int32_t self) {
        Tensor *ga = tp.MaybeGrad(ai);
        if (ga == nullptr) return;
        const Tensor &g = tp.OutGrad(self);
        const int n = g.Dim(0), kk = g.Dim(1);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < kk; ++j) ga->At(i, idx[j]) += g.At(i, j);
      });
}

Var GatherCols(Var a, std::vector<int> col_of_row) {
  FOCCE_CHECK(a.tape != nullptr);
  const Tensor &av = a.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2, "GatherCols expects a matrix");
  const int n = av.Dim(0), m = av.Dim(1);
  FOCCE_CHECK_MSG(static_cast<int>(col_of_row.size()) == n,
                  "GatherCols needs one column per row");
  Tensor out({n});
  for (int i = 0; i < n; ++i) {
    FOCCE_CHECK_MSG(col_of_row[i] >= 0 && col_of_row[i] < m,
                    "GatherCols index out of range");
    out[i] = av.At(i, col_of_row[i]);
  }
  const int32_t ai = a.id;
  return a.tape->Record(
      std::move(out), {a},
      [ai, idx = std::move(col_of_row)](Tape &tp, int32_t self) {
        Tensor *ga = tp.MaybeGrad(ai);
        if (ga == nullptr) return;
        const Tensor &g = tp.OutGrad(self);
        const int n = g.Dim(0);
        for (int i = 0; i < n; ++i) ga->At(i, idx[i]) += g[i];
      });
}

Var ConcatCols(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2 && bv.Rank() == 2 && av.Dim(0) == bv.Dim(0),
                  "ConcatCols of shapes " + av.ShapeString() + " and " +
                      bv.ShapeString());
  const int n = av.Dim(0), p = av.Dim(1), q = bv.Dim(1);
  Tensor out({n, p + q});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) out.At(i, j) = av.At(i, j);
    for (int j = 0; j < q; ++j) out.At(i, p + j) = bv.At(i, j);
  }
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, p](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const int n = g.Dim(0), total = g.Dim(1);
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) ga->At(i, j) += g.At(i, j);
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      for (int i = 0; i < n; ++i)
        for (int j = p; j < total; ++j) gb->At(i, j - p) += g.At(i, j);
    }
  });
}

Var ConcatRows(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2 && bv.Rank() == 2 && av.Dim(1) == bv.Dim(1),
                  "ConcatRows of shapes " + av.ShapeString() + " and " +
                      bv.ShapeString());
  const int p = av.Dim(0), q = bv.Dim(0), m = av.Dim(1);
  Tensor out({p + q, m});
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < m; ++j) out.At(i, j) = av.At(i, j);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < m; ++j) out.At(p + i, j) = bv.At(i, j);
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi, p](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const int total = g.Dim(0), m = g.Dim(1);
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < m; ++j) ga->At(i, j) += g.At(i, j);
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      for (int i = p; i < total; ++i)
        for (int j = 0; j < m; ++j) gb->At(i - p, j) += g.At(i, j);
    }
  });
}

Var StackRows(std::span<const Var> rows) {
  FOCCE_CHECK_MSG(!rows.empty(), "StackRows of no rows");
  Tape *t = rows[0].tape;
  FOCCE_CHECK(t != nullptr);
  const int d = static_cast<int>(rows[0].Value().NumEl());
  const int n = static_cast<int>(rows.size());
  Tensor out({n, d});
  std::vector<int32_t> ids(rows.size());
  for (int i = 0; i < n; ++i) {
    FOCCE_CHECK_MSG(rows[i].tape == t, "StackRows across tapes");
    const Tensor &rv = rows[i].Value();
    FOCCE_CHECK_MSG(rv.NumEl() == d, "StackRows of unequal row sizes");
    for (int j = 0; j < d; ++j) out.At(i, j) = rv[j];
    ids[i] = rows[i].id;
  }
  return t->Record(std::move(out), rows,
                   [ids = std::move(ids)](Tape &tp, int32_t self) {
                     const Tensor &g = tp.OutGrad(self);
                     const int n = g.Dim(0), d = g.Dim(1);
                     for (int i = 0; i < n; ++i) {
                       Tensor *gr = tp.MaybeGrad(ids[i]);
                       if (gr == nullptr) continue;
                       for (int j = 0; j < d; ++j) (*gr)[j] += g.At(i, j);
                     }
                   });
}

Var OuterAdd(Var a, Var b) {
  Tape *t = SameTape(a, b);
  const Tensor &av = a.Value(), &bv = b.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2 && bv.Rank() == 2 && av.Dim(1) == bv.Dim(1),
                  "OuterAdd of shapes " + av.ShapeString() + " and " +
                      bv.ShapeString());
  const int n = av.Dim(0), m = bv.Dim(0), kk = av.Dim(1);
  Tensor out({n, m, kk});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int q = 0; q < kk; ++q) out.At(i, j, q) = av.At(i, q) + bv.At(j, q);
  const int32_t ai = a.id, bi = b.id;
  return t->Record(std::move(out), {a, b}, [ai, bi](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const int n = g.Dim(0), m = g.Dim(1), kk = g.Dim(2);
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          for (int q = 0; q < kk; ++q) ga->At(i, q) += g.At(i, j, q);
    }
    if (Tensor *gb = tp.MaybeGrad(bi)) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          for (int q = 0; q < kk; ++q) gb->At(j, q) += g.At(i, j, q);
    }
  });
}

Var AddRowVector(Var a, Var v) {
  Tape *t = SameTape(a, v);
  const Tensor &av = a.Value(), &vv = v.Value();
  FOCCE_CHECK_MSG(av.Rank() == 2 && vv.Rank() == 1 && av.Dim(1) == vv.Dim(0),
                  "AddRowVector of shapes " + av.ShapeString() + " and " +
                      vv.ShapeString());
  const int n = av.Dim(0), kk = av.Dim(1);
  Tensor out({n, kk});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < kk; ++j) out.At(i, j) = av.At(i, j) + vv[j];
  const int32_t ai = a.id, vi = v.id;
  return t->Record(std::move(out), {a, v}, [ai, vi](Tape &tp, int32_t self) {
    const Tensor &g = tp.OutGrad(self);
    const int n = g.Dim(0), kk = g.Dim(1);
    if (Tensor *ga = tp.MaybeGrad(ai)) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < kk; ++j) ga->At(i, j) += g.At(i, j);
    }
    if (Tensor *gv = tp.MaybeGrad(vi)) {
      for (int j = 0; j < kk; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += g.At(i, j);
        (*gv)[j] += s;
      }
    }
  });
}

Var StopGradient(Var a) {
  FOCCE_CHECK(a.tape != nullptr);
  // A detached leaf holding a copy of the value: the backward sweep never
  // visits it, so upstream gradients are exactly zero, not merely small.
  return a.tape->Leaf(a.Value(), false);
}

Var ChunkConv(Var x, Var w, Var b, int back_taps, int fwd_taps,
              std::vector<int> window_end) {
  Tape *t = SameTape(x, w);
  FOCCE_CHECK(b.tape == t);
  const Tensor &xv = x.Value(), &wv = w.Value(), &bv = b.Value();
  FOCCE_CHECK_MSG(xv.Rank() == 2 && wv.Rank() == 3 && bv.Rank() == 1,
                  "ChunkConv operand ranks");
  const int T = xv.Dim(0), din = xv.Dim(1);
  const int taps = wv.Dim(0), dout = wv.Dim(2);
  FOCCE_CHECK_MSG(back_taps >= 0 && fwd_taps >= 0 &&
                      taps == back_taps + 1 + fwd_taps,
                  "ChunkConv tap count mismatch");
  FOCCE_CHECK_MSG(wv.Dim(1) == din && bv.Dim(0) == dout,
                  "ChunkConv weight shape mismatch");
  FOCCE_CHECK_MSG(static_cast<int>(window_end.size()) == T,
                  "ChunkConv needs one window end per frame");
  for (int tt = 0; tt < T; ++tt)
    FOCCE_CHECK_MSG(window_end[tt] >= 0 && window_end[tt] < T,
                    "ChunkConv window end out of range");
  Tensor out({T, dout});
  for (int tt = 0; tt < T; ++tt) {
    for (int o = -back_taps; o <= fwd_taps; ++o) {
      const int s = tt + o;
      // Frames past the visibility boundary are skipped outright; they never
      // enter any arithmetic, so the output cannot depend on them even
      // through rounding.
      if (s < 0 || s > window_end[tt]) continue;
      const int tap = o + back_taps;
      for (int di = 0; di < din; ++di) {
        const double xs = xv.At(s, di);
        for (int dq = 0; dq < dout; ++dq)
          out.At(tt, dq) += xs * wv.At(tap, di, dq);
      }
    }
    for (int dq = 0; dq < dout; ++dq) out.At(tt, dq) += bv[dq];
  }
  const int32_t xi = x.id, wi = w.id, bi = b.id;
  return t->Record(
      std::move(out), {x, w, b},
      [xi, wi, bi, back_taps, fwd_taps,
       we = std::move(window_end)](Tape &tp, int32_t self) {
        const Tensor &g = tp.OutGrad(self);
        const Tensor &xv = tp.ValueOf(xi), &wv = tp.ValueOf(wi);
        const int T = xv.Dim(0), din = xv.Dim(1), dout = wv.Dim(2);
        Tensor *gx = tp.MaybeGrad(xi);
        Tensor *gw = tp.MaybeGrad(wi);
        Tensor *gb = tp.MaybeGrad(bi);
        for (int tt = 0; tt < T; ++tt) {
          for (int o = -back_taps; o <= fwd_taps; ++o) {
            const int s = tt + o;
            if (s < 0 || s > we[tt]) continue;
            const int tap = o + back_taps;
            for (int di = 0; di < din; ++di) {
              double acc = 0.0;
              for (int dq = 0; dq < dout; ++dq) {
                const double go = g.At(tt, dq);
                acc += go * wv.At(tap, di, dq);
                if (gw != nullptr) gw->At(tap, di, dq) += xv.At(s, di) * go;
              }
              if (gx != nullptr) gx->At(s, di) += acc;
            }
          }
          if (gb != nullptr) {
            for (int dq = 0; dq < dout; ++dq) (*gb)[dq] += g.At(tt, dq);
          }
        }
      });
}

}  // namespace ad
}  // namespace focce
