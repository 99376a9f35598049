// focce/autodiff.h
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

#ifndef FOCCE_AUTODIFF_H_
#define FOCCE_AUTODIFF_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "focce/tensor.h"

namespace focce {
namespace ad {

class Tape;

// Handle to a node on a Tape. Copying a Var never copies data.
struct Var {
  Tape *tape = nullptr;
  int32_t id = -1;

  bool Valid() const { return tape != nullptr; }
  const Tensor &Value() const;
  bool RequiresGrad() const;
};

// Backward rule of one node. Receives the owning tape and the node's own id;
// parent ids are captured in the closure. The rule reads the node's output
// gradient via Tape::OutGrad(self) and accumulates into parents via
// Tape::MaybeGrad(parent).
using BackwardFn = std::function<void(Tape &, int32_t)>;

// Records a single computation. Nodes are appended in evaluation order, so
// parents always precede children and the reverse sweep visits each node
// exactly once. One tape per logical computation; tapes are not thread-safe
// and must be confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var Leaf(Tensor value, bool requires_grad);
  Var Constant(Tensor value) { return Leaf(std::move(value), false); }
  Var ConstantScalar(double v) { return Leaf(Tensor::Scalar(v), false); }

  // Appends a node. requires_grad is inherited from the parents; backward is
  // dropped when no parent needs gradients.
  Var Record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
  Var Record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  // Reverse sweep from a scalar root. May be called more than once; each call
  // resets previously computed gradients.
  void Backward(const Var &root);

  // Gradient of the last Backward root with respect to v. Returns a
  // zero-filled tensor of v's shape when no gradient reached v.
  const Tensor &GradOf(const Var &v);

  size_t Size() const { return nodes_.size(); }

  // --- internals used by op backward rules ---
  const Tensor &ValueOf(int32_t id) const { return nodes_[id].value; }
  bool NodeRequiresGrad(int32_t id) const { return nodes_[id].requires_grad; }
  const Tensor &OutGrad(int32_t id) const { return grads_[id]; }
  // Zero-initialized gradient buffer for a parent, or nullptr when the parent
  // does not require gradients (accumulation can be skipped).
  Tensor *MaybeGrad(int32_t id);

 private:
  struct Node {
    Tensor value;
    BackwardFn backward;  // empty for leaves and detached nodes
    bool requires_grad = false;
  };

  // deque keeps references stable across appends.
  std::deque<Node> nodes_;
  std::deque<Tensor> grads_;
};

// Convenience: runs root.tape->Backward(root) and collects gradients for the
// given parameters, in order. The root must be scalar.
std::vector<Tensor> Gradients(const Var &root, std::span<const Var> params);

// ---------------------------------------------------------------------------
// Elementwise operations. Binary ops accept equal shapes or a one-element
// (scalar-like) operand on either side; anything else is an error.
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Div(Var a, Var b);
// log(exp(a) + exp(b)) computed stably; -inf operands are absorbed exactly.
Var LogAddExp(Var a, Var b);

Var Neg(Var a);
Var Exp(Var a);
// Natural log. Inputs must be positive unless allow_zero is set, in which
// case zero maps to -inf with zero gradient.
Var Log(Var a, bool allow_zero = false);
Var Tanh(Var a);
Var Relu(Var a);
Var Sigmoid(Var a);
Var PowConst(Var a, double p);
Var Scale(Var a, double c);
Var AddConst(Var a, double c);

// ---------------------------------------------------------------------------
// Linear algebra and reductions.
Var Matmul(Var a, Var b);                 // [m,k] x [k,n] -> [m,n]
Var Sum(Var a);                           // -> scalar
Var Mean(Var a);                          // -> scalar
Var RowSum(Var a);                        // [n,m] -> [n]
// Stable log-sum-exp over one axis; the reduced axis must be non-empty.
Var LogSumExp(Var a, int axis);
// Rows of a [n,m] input are replaced by log-softmax over the last axis.
Var LogSoftmaxRows(Var a);

// ---------------------------------------------------------------------------
// Structure.
Var Reshape(Var a, std::vector<int> shape);
Var At(Var a, int64_t flat_index);        // -> scalar
Var Rows(Var a, std::vector<int> row_indices);       // [n,d] -> [m,d]
Var Cols(Var a, std::vector<int> col_indices);       // [n,m] -> [n,k]
Var GatherCols(Var a, std::vector<int> col_of_row);  // [n,m] -> [n]
Var ConcatCols(Var a, Var b);             // [n,p] + [n,q] -> [n,p+q]
Var ConcatRows(Var a, Var b);             // [p,m] + [q,m] -> [p+q,m]
Var StackRows(std::span<const Var> rows); // k vectors [d] -> [k,d]
// out(i,j,:) = a(i,:) + b(j,:)
Var OuterAdd(Var a, Var b);               // [n,k] + [m,k] -> [n,m,k]
Var AddRowVector(Var a, Var v);           // [n,k] + [k] -> [n,k]

// Identity forward; exactly zero contribution to every ancestor in the
// backward pass.
Var StopGradient(Var a);

// 1-D convolution over the leading (time) axis with a per-frame visibility
// limit. Output frame t sums taps at input frames t+o for
// o in [-back_taps, fwd_taps] clipped to [0, window_end[t]]; frames outside
// that range contribute nothing (no arithmetic is done with them, so masked
// frames cannot perturb the output even at the bit level).
//   x: [T, d_in], w: [back_taps+1+fwd_taps, d_in, d_out], b: [d_out]
Var ChunkConv(Var x, Var w, Var b, int back_taps, int fwd_taps,
              std::vector<int> window_end);

// Convenience arithmetic.
inline Var operator+(Var a, Var b) { return Add(a, b); }
inline Var operator-(Var a, Var b) { return Sub(a, b); }
inline Var operator*(Var a, Var b) { return Mul(a, b); }

}  // namespace ad
}  // namespace focce

#endif  // FOCCE_AUTODIFF_H_
