// focce/train.cc
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

#include "focce/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "focce/common.h"
#include "focce/decode.h"
#include "focce/lattice.h"
#include "focce/streaming.h"

namespace focce {

namespace {

TrainConfig Validated(TrainConfig c) {
  FOCCE_CHECK_MSG(c.lambda_mod >= 0 && c.lambda_chi >= 0 && c.lambda_gamma >= 0,
                  "objective weights must be nonnegative");
  FOCCE_CHECK_MSG(c.lr > 0 && c.epochs >= 0 && c.batch_size >= 1 &&
                      c.warmup_steps >= 0,
                  "bad training loop config");
  return c;
}

FoCCENetConfig Merged(const TransducerConfig &model, FoCCENetConfig est,
                      const TrainConfig &cfg) {
  FOCCE_CHECK_MSG(model.vocab == est.vocab &&
                      model.feature_dim == est.feature_dim &&
                      model.stack == est.stack,
                  "transducer and estimator configs disagree on the data");
  est.lambda_gamma = cfg.lambda_gamma;
  return est;
}

}  // namespace

void WriteMetricsCsv(std::ostream &os, const std::vector<MetricsRecord> &rows) {
  os << "epoch,deformed_ll,modified_ll,focce_objective,mean_abs_log_gamma,"
        "ter,seed\n";
  char buf[512];
  for (const MetricsRecord &r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%llu\n",
                  r.epoch, r.deformed_ll, r.modified_ll, r.focce_objective,
                  r.mean_abs_log_gamma, r.ter,
                  static_cast<unsigned long long>(r.seed));
    os << buf;
  }
}

Trainer::Trainer(const TransducerConfig &model_cfg,
                 const FoCCENetConfig &est_cfg, const TrainConfig &cfg,
                 int right_context)
    : cfg_(Validated(cfg)),
      est_cfg_(Merged(model_cfg, est_cfg, cfg)),
      right_(right_context),
      root_(cfg.seed),
      theta_rng_(root_.Fork()),
      omega_rng_(root_.Fork()),
      shuffle_rng_(root_.Fork()),
      net_(model_cfg, &theta_, "theta", theta_rng_),
      opt_theta_(cfg.optimizer, cfg.lr),
      opt_omega_(cfg.optimizer,
                 cfg.estimator_lr > 0 ? cfg.estimator_lr : cfg.lr) {
  FOCCE_CHECK_MSG(right_ >= 0, "negative right context");
  if (cfg_.mode == ObjectiveMode::kFocceModified)
    est_.emplace(est_cfg_, &omega_, "omega", omega_rng_);
}

ad::Var Trainer::UttLoss(ad::Tape &tape, const Mounted &mt, const Mounted *mo,
                         const Utterance &utt, bool use_gamma) const {
  const int steps = net_.NumSteps(utt.x.Dim(0));
  ContextSchedule sch = MakeSchedule(est_cfg_.chunk, right_, steps);
  LocalProbTable probs = net_.BuildProbTable(mt, utt.x, utt.y, sch);
  const int U = static_cast<int>(utt.y.size());
  FoCCTable gamma;
  ad::Var lchi;
  if (mo) {
    FoCCENet::Densities d = est_->ChiDensities(*mo, utt.x, utt.y, sch);
    gamma = use_gamma ? est_->BuildGamma(*mo, d, sch, U)
                      : ZeroFoCCTable(tape, sch, U);
    lchi = est_->Objective(*mo, d, U);
  } else {
    gamma = ZeroFoCCTable(tape, sch, U);
  }
  ad::Var lmod = ModifiedLikelihood(probs, sch, gamma, /*detach_focc=*/true);
  ad::Var total = ad::Scale(lmod, cfg_.lambda_mod);
  if (mo) total = ad::Add(total, ad::Scale(lchi, cfg_.lambda_chi));
  return ad::Neg(total);
}

Trainer::BatchGrads Trainer::ComputeBatch(
    const std::vector<const Utterance *> &batch, int64_t step_index) const {
  FOCCE_CHECK_MSG(!batch.empty(), "empty batch");
  BatchGrads out;
  for (int h = 0; h < theta_.Size(); ++h)
    out.theta.emplace_back(theta_.Value(h).Shape());
  for (int h = 0; h < omega_.Size(); ++h)
    out.omega.emplace_back(omega_.Value(h).Shape());
  const bool use_gamma = est_ && step_index >= cfg_.warmup_steps;
  for (const Utterance *utt : batch) {
    ad::Tape tape;
    Mounted mt = MountParams(tape, theta_, /*requires_grad=*/true);
    Mounted mo;
    if (est_) mo = MountParams(tape, omega_, /*requires_grad=*/true);
    ad::Var loss = UttLoss(tape, mt, est_ ? &mo : nullptr, *utt, use_gamma);
    tape.Backward(loss);
    out.loss += loss.Value()[0];
    std::vector<Tensor> gt = CollectGrads(tape, mt);
    for (size_t i = 0; i < gt.size(); ++i)
      for (int64_t j = 0; j < gt[i].NumEl(); ++j) out.theta[i][j] += gt[i][j];
    if (est_) {
      std::vector<Tensor> go = CollectGrads(tape, mo);
      for (size_t i = 0; i < go.size(); ++i)
        for (int64_t j = 0; j < go[i].NumEl(); ++j) out.omega[i][j] += go[i][j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (Tensor &g : out.theta)
    for (int64_t j = 0; j < g.NumEl(); ++j) g[j] *= inv;
  for (Tensor &g : out.omega)
    for (int64_t j = 0; j < g.NumEl(); ++j) g[j] *= inv;
  return out;
}

double Trainer::Step(const std::vector<const Utterance *> &batch) {
  BatchGrads g = ComputeBatch(batch, step_);
  const double tn = GlobalNorm(g.theta);
  const double on = est_ ? GlobalNorm(g.omega) : 0.0;
  if (!std::isfinite(g.loss) || !std::isfinite(tn) || !std::isfinite(on)) {
    diverged_ = true;
    diagnostic_ =
        "non-finite loss or gradient at step " + std::to_string(step_);
    return g.loss;
  }
  if (cfg_.clip_norm > 0) {
    ClipByGlobalNorm(&g.theta, cfg_.clip_norm);
    if (est_) ClipByGlobalNorm(&g.omega, cfg_.clip_norm);
  }
  opt_theta_.Step(&theta_, g.theta);
  if (est_) opt_omega_.Step(&omega_, g.omega);
  ++step_;
  return g.loss;
}

MetricsRecord Trainer::Evaluate(const std::vector<Utterance> &eval,
                                int epoch) const {
  FOCCE_CHECK_MSG(!eval.empty(), "empty eval set");
  MetricsRecord r;
  r.epoch = epoch;
  r.seed = cfg_.seed;
  double def = 0, mod = 0, chi = 0, gamma_abs = 0;
  int64_t gamma_n = 0, dist = 0, ref_len = 0;
  for (const Utterance &utt : eval) {
    ad::Tape tape;
    Mounted mt = MountParams(tape, theta_, /*requires_grad=*/false);
    const int steps = net_.NumSteps(utt.x.Dim(0));
    ContextSchedule sch = MakeSchedule(est_cfg_.chunk, right_, steps);
    LocalProbTable probs = net_.BuildProbTable(mt, utt.x, utt.y, sch);
    const int U = static_cast<int>(utt.y.size());
    def += DeformedLikelihood(probs).Value()[0];
    FoCCTable gamma;
    if (est_) {
      Mounted mo = MountParams(tape, omega_, /*requires_grad=*/false);
      FoCCENet::Densities d = est_->ChiDensities(mo, utt.x, utt.y, sch);
      gamma = est_->BuildGamma(mo, d, sch, U);
      chi += est_->Objective(mo, d, U).Value()[0];
      const Tensor &rows = gamma.log_gamma_rows.Value();
      for (int64_t j = 0; j < rows.NumEl(); ++j) gamma_abs += std::abs(rows[j]);
      gamma_n += rows.NumEl();
    } else {
      gamma = ZeroFoCCTable(tape, sch, U);
    }
    mod += ModifiedLikelihood(probs, sch, gamma, /*detach_focc=*/true)
               .Value()[0];
    DecodeTable table = MakeDecodeTable(net_, theta_, utt.x, sch);
    dist += EditDistance(GreedyDecode(table), utt.y);
    ref_len += static_cast<int64_t>(utt.y.size());
  }
  const double n = static_cast<double>(eval.size());
  r.deformed_ll = def / n;
  r.modified_ll = mod / n;
  r.focce_objective = est_ ? chi / n : 0.0;
  r.mean_abs_log_gamma = gamma_n > 0 ? gamma_abs / gamma_n : 0.0;
  r.ter = static_cast<double>(dist) / std::max<int64_t>(1, ref_len);
  return r;
}

std::vector<MetricsRecord> Trainer::Fit(const std::vector<Utterance> &train,
                                        const std::vector<Utterance> &eval) {
  FOCCE_CHECK_MSG(!train.empty() && !eval.empty(), "empty dataset");
  std::vector<MetricsRecord> out;
  try {
    out.push_back(Evaluate(eval, 0));
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (int epoch = 1; epoch <= cfg_.epochs && !diverged_; ++epoch) {
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng_.Int(static_cast<int>(i))]);
      for (size_t at = 0; at < order.size() && !diverged_;
           at += static_cast<size_t>(cfg_.batch_size)) {
        const size_t end =
            std::min(order.size(), at + static_cast<size_t>(cfg_.batch_size));
        std::vector<const Utterance *> batch;
        batch.reserve(end - at);
        for (size_t i = at; i < end; ++i) batch.push_back(&train[order[i]]);
        Step(batch);
      }
      if (!diverged_) out.push_back(Evaluate(eval, epoch));
    }
  } catch (const ContractError &e) {
    // Numeric breakdown can surface as a violated precondition deep in the
    // graph (overflowed compensation weights, a softmax row with no mass)
    // before the loss itself goes non-finite. The driver degrades to the
    // divergence path so callers still get the surviving metrics plus a
    // diagnostic instead of a crash.
    diverged_ = true;
    diagnostic_ = e.what();
  }
  return out;
}

}  // namespace focce
