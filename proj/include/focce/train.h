// focce/train.h
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

#ifndef FOCCE_TRAIN_H_
#define FOCCE_TRAIN_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "focce/focce_net.h"
#include "focce/params.h"
#include "focce/rng.h"
#include "focce/synth.h"
#include "focce/transducer_net.h"

namespace focce {

enum class ObjectiveMode { kDeformedBaseline, kFocceModified };
enum class OptimizerKind { kSgd, kAdam };

// Objective weights and loop controls. lambda_gamma lives here and is
// forwarded into the estimator config, so a sweep touches a single knob.
struct TrainConfig {
  ObjectiveMode mode = ObjectiveMode::kFocceModified;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lambda_mod = 1.0;
  double lambda_chi = 0.01;
  double lambda_gamma = 0.05;
  double lr = 1e-3;
  // Density estimators tolerate (and need) a hotter schedule than the
  // transducer at these model sizes; <= 0 falls back to lr.
  double estimator_lr = 0;
  int epochs = 10;
  int batch_size = 8;
  // Optimizer steps before the compensation weights enter the modified
  // recursion; the estimator objective itself trains from step 0.
  int warmup_steps = 0;
  // Applied to the transducer and estimator gradients separately; <= 0
  // disables clipping.
  double clip_norm = 5.0;
  uint64_t seed = 1;
};

struct MetricsRecord {
  int epoch = 0;
  double deformed_ll = 0;         // eval-set means, per utterance
  double modified_ll = 0;
  double focce_objective = 0;     // 0 when no estimator is constructed
  double mean_abs_log_gamma = 0;  // over boundary rows, all label positions
  double ter = 0;                 // corpus-level greedy token error rate
  uint64_t seed = 0;
};

// Fixed header and %.17g doubles: identical metric series produce identical
// bytes, which is what makes reruns diffable.
void WriteMetricsCsv(std::ostream &os, const std::vector<MetricsRecord> &rows);

// Gradient-ascent driver owning both parameter families. The transducer
// parameters only ever receive gradient through the modified-likelihood
// term (compensation weights enter it behind a stop-gradient); the
// estimator parameters only through the estimator objective. In
// deformed-baseline mode no estimator exists at all and the modified term
// runs with an all-zero compensation table, which is exactly the deformed
// likelihood with the same operation sequence, so the two modes are
// gradient-identical whenever the weights vanish.
class Trainer {
 public:
  Trainer(const TransducerConfig &model_cfg, const FoCCENetConfig &est_cfg,
          const TrainConfig &cfg, int right_context = 0);

  struct BatchGrads {
    double loss = 0;  // batch-mean negative total objective
    std::vector<Tensor> theta;
    std::vector<Tensor> omega;  // empty in deformed-baseline mode
  };
  // Batch-averaged raw gradients at the current parameters; no update, no
  // clipping. step_index selects warmup behavior.
  BatchGrads ComputeBatch(const std::vector<const Utterance *> &batch,
                          int64_t step_index) const;

  // Clip, apply one optimizer update per family, advance the step counter.
  // A non-finite batch loss flags divergence and skips the update.
  double Step(const std::vector<const Utterance *> &batch);

  MetricsRecord Evaluate(const std::vector<Utterance> &eval, int epoch) const;

  // Epoch 0 records the untrained starting point; each subsequent record
  // follows one shuffled pass over train. Stops early on divergence.
  std::vector<MetricsRecord> Fit(const std::vector<Utterance> &train,
                                 const std::vector<Utterance> &eval);

  bool Diverged() const { return diverged_; }
  const std::string &Diagnostic() const { return diagnostic_; }
  int64_t StepCount() const { return step_; }
  ParamSet &Theta() { return theta_; }
  const ParamSet &Theta() const { return theta_; }
  ParamSet &Omega() { return omega_; }
  const ParamSet &Omega() const { return omega_; }
  const TransducerNet &Model() const { return net_; }
  const FoCCENet *Estimator() const { return est_ ? &*est_ : nullptr; }
  int Chunk() const { return est_cfg_.chunk; }
  int RightContext() const { return right_; }

 private:
  // Either optimizer kind behind one Step call; state per parameter family.
  struct AnyOpt {
    OptimizerKind kind;
    SgdOptimizer sgd;
    AdamOptimizer adam;
    AnyOpt(OptimizerKind k, double lr) : kind(k), sgd(lr), adam(lr) {}
    void Step(ParamSet *ps, const std::vector<Tensor> &grads) {
      if (kind == OptimizerKind::kSgd)
        sgd.Step(ps, grads);
      else
        adam.Step(ps, grads);
    }
  };

  // Per-utterance negative total objective on the given tape. mo == nullptr
  // means no estimator term; use_gamma picks real compensation rows over the
  // structural zero table.
  ad::Var UttLoss(ad::Tape &tape, const Mounted &mt, const Mounted *mo,
                  const Utterance &utt, bool use_gamma) const;

  TrainConfig cfg_;
  FoCCENetConfig est_cfg_;
  int right_ = 0;
  Rng root_, theta_rng_, omega_rng_, shuffle_rng_;
  ParamSet theta_, omega_;
  TransducerNet net_;
  std::optional<FoCCENet> est_;
  AnyOpt opt_theta_, opt_omega_;
  int64_t step_ = 0;
  bool diverged_ = false;
  std::string diagnostic_;
};

}  // namespace focce

#endif  // FOCCE_TRAIN_H_
