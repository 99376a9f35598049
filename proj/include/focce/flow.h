// focce/flow.h
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

#ifndef FOCCE_FLOW_H_
#define FOCCE_FLOW_H_

#include <string>
#include <vector>

#include "focce/autodiff.h"
#include "focce/params.h"
#include "focce/rng.h"
#include "focce/tensor.h"

namespace focce {

struct FlowConfig {
  int dim = 1;       // modeled vector dimension
  int cond_dim = 0;  // conditioning vector dimension; 0 = unconditional
  int hidden = 16;   // conditioner hidden width
  int depth = 1;     // number of autoregressive layers
  int blocks = 2;    // hidden layers per conditioner
};

// Masked autoregressive flow with a standard Gaussian prior. Each layer maps
// v -> z = (v - mu(v_<, c)) * exp(-s(v_<, c)) dimension by dimension, so the
// layer log-determinant is -sum(s). Layers beyond the first see the previous
// layer's output through a fixed dimension reversal. The conditioner is a
// masked feed-forward net whose final layer starts at zero, so a fresh flow
// is exactly the identity and a fresh density is exactly the prior.
class Maf {
 public:
  Maf(const FlowConfig &cfg, ParamSet *params, const std::string &prefix,
      Rng &rng);

  const FlowConfig &Config() const { return cfg_; }

  // Per-row conditional log-density, differentiable wrt mounted parameters,
  // v, and cond. v is [n, dim]; cond is [n, cond_dim] (ignored when
  // cond_dim == 0). mask, when given, is a [n, dim] 0/1 tensor selecting the
  // leading sub-dimensions that carry real data; the density is then the
  // exact density of the masked prefix under the induced sub-flow. Masks
  // require depth == 1 (with deeper flows the dimension reversal mixes
  // padded positions into real ones).
  ad::Var LogDensityRows(const Mounted &m, ad::Var v, ad::Var cond,
                         const Tensor *mask = nullptr) const;

  // Value-only paths (no tape, no gradients).
  struct ForwardResult {
    Tensor z;        // [dim]
    double log_det;  // log |det dz/dv|
  };
  ForwardResult ForwardValues(const ParamSet &ps, const Tensor &v,
                              const Tensor &cond) const;
  double LogDensityValue(const ParamSet &ps, const Tensor &v,
                         const Tensor &cond) const;
  // Inverts the composed map; Inverse(ForwardValues(v).z) == v.
  Tensor Inverse(const ParamSet &ps, const Tensor &z, const Tensor &cond) const;

 private:
  struct LayerParams {
    int w_in = -1, b_in = -1;
    std::vector<int> w_hh, b_hh;
    int w_out = -1, b_out = -1;
    int w_cond = -1;  // direct condition-to-output skip; -1 when cond_dim == 0
  };

  // Plain-double conditioner: mu and s for every dimension given the current
  // vector and condition. Mirrors the op sequence of the tape path.
  void CondEval(const ParamSet &ps, const LayerParams &lp, const double *cur,
                const double *cond, std::vector<double> *mu,
                std::vector<double> *s) const;

  FlowConfig cfg_;
  std::vector<LayerParams> layers_;
  Tensor mask_in_;   // [dim + cond_dim, hidden]
  Tensor mask_hh_;   // [hidden, hidden]
  Tensor mask_out_;  // [hidden, 2*dim]
  std::vector<int> reverse_;  // dimension reversal between layers
};

}  // namespace focce

#endif  // FOCCE_FLOW_H_
