// Scratch experiment calibration harness; not part of the shipped CLI.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "focce/decode.h"
#include "focce/train.h"

using namespace focce;

namespace {

struct Arm {
  std::string name;
  ObjectiveMode mode;
  double lambda_gamma;
};

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Mean log chi - log chi_bar at boundary cells, split by boundary kind and
// prefix phase. echo buckets: the next chunk starts event q's marker, which
// echoes label q-1; the in-phase prefix is u = q-1 (all closed events
// emitted), the lagging one u = q-2. str buckets: event m's marker spans
// the boundary and its closing frame is next; u = m has emitted the label
// early, u = m-1 is the informed prefix.
void ProbeEstimator(const FoCCENet &net, const ParamSet &omega,
                    const TaskSpec &task, int utts) {
  Rng rng(424242);
  constexpr int kBuckets = 7;
  double sums[kBuckets] = {0};
  int64_t ns[kBuckets] = {0};
  const char *names[kBuckets] = {"echo+",  "echo-1", "echo*", "str0",
                                 "str-1", "str*",   "none"};
  for (int i = 0; i < utts; ++i) {
    std::vector<Event> events;
    Utterance utt = SynthUtterance(task, rng, &events);
    int steps = (utt.x.Dim(0) + task.stack - 1) / task.stack;
    ContextSchedule sch = MakeSchedule(task.chunk, task.right, steps);
    ad::Tape tape;
    Mounted mo = MountParams(tape, omega, false);
    FoCCENet::Densities d = net.ChiDensities(mo, utt.x, utt.y, sch);
    int U = static_cast<int>(utt.y.size());
    for (size_t b = 0; b < d.boundary_frames.size(); ++b) {
      int t = d.boundary_frames[b] * task.stack;  // raw frames visible
      int q = 0, m = 0;  // 1-based upcoming / straddling event
      for (size_t e = 0; e < events.size(); ++e) {
        int p = events[e].pos;
        if (p == t + 1) q = static_cast<int>(e) + 1;
        if (p <= t && t < p + task.horizon) m = static_cast<int>(e) + 1;
      }
      double bar = d.log_chi_bar.Value()[static_cast<int64_t>(b)];
      for (int u = 1; u <= U; ++u) {  // u = 0 column is untrained
        double delta = d.log_chi.Value().At(static_cast<int>(b), u) - bar;
        if (q == 1) continue;  // first marker echoes the fixed start dir
        int bucket = q   ? (u == q - 1 ? 0 : u == q - 2 ? 1 : 2)
                     : m ? (u == m ? 3 : u == m - 1 ? 4 : 5)
                         : 6;
        sums[bucket] += delta;
        ++ns[bucket];
      }
    }
  }
  std::printf("  probe:");
  for (int k = 0; k < kBuckets; ++k)
    std::printf(" %s=%.3f (n=%lld)", names[k],
                ns[k] ? sums[k] / ns[k] : 0.0, (long long)ns[k]);
  std::printf("\n");
}

// Minimal conditional-density check through the full estimator stack: the
// first frame of the chunk after a boundary encodes the single label as a
// direction on dims (0, 1), everything else is noise. A working
// conditioning path drives log chi(t,1) well above log chi_bar(t) at that
// boundary. Knobs bisect toward the real task: length, onset variation,
// feature dim, marker rows, noise.
int UnitConditioning() {
  auto env_int = [](const char *k, int dflt) {
    const char *v = std::getenv(k);
    return v ? std::atoi(v) : dflt;
  };
  int vocab = env_int("CAL_UNIT_V", 8);
  int T = env_int("CAL_UNIT_T", 8);
  int feat = env_int("CAL_UNIT_FEAT", 2);
  int marker = env_int("CAL_UNIT_MARKER", 0);
  int varpos = env_int("CAL_UNIT_VARPOS", 0);
  int steps = env_int("CAL_UNIT_STEPS", 600);
  int echo = env_int("CAL_UNIT_ECHO", 0);
  double noise = 0.05;
  if (const char *v = std::getenv("CAL_UNIT_NOISE")) noise = std::atof(v);
  if (echo) {
    T = std::max(T, 12);
    marker = 1;
    varpos = 0;
  }

  FoCCENetConfig est;
  est.feature_dim = feat;
  est.stack = 1;
  est.chunk = 4;
  est.encoder_dim = 12;
  est.encoder_layers = 2;
  est.kernel = 3;
  est.vocab = vocab;
  est.embed_dim = 8;
  est.predictor_dim = 12;
  est.flow_hidden = 24;
  est.flow_depth = 1;
  est.flow_blocks = 2;

  int mbase = feat >= 4 ? 2 : 0;
  Rng data_rng(5150);
  // Plain variant: one label, carried by the closing frame at p + 4; marker
  // rows (if on) hold a constant direction. Echo variant: two labels, the
  // marker echoes the first, the closing carries the second.
  auto make_utt = [&](int label, int label2, int p) {
    Utterance u;
    u.x = Tensor({T, feat});
    for (int64_t i = 0; i < u.x.NumEl(); ++i) u.x[i] = noise * data_rng.Normal();
    int closing = echo ? label2 : label;
    double angle = 2.0 * M_PI * (closing - 1) / vocab;
    u.x.At(p - 1 + 4, 0) += 1.2 * std::cos(angle);
    u.x.At(p - 1 + 4, 1) += 1.2 * std::sin(angle);
    if (marker) {
      double ma = echo ? 2.0 * M_PI * (label - 1) / vocab : M_PI / vocab;
      for (int j = 0; j < 4; ++j) {
        u.x.At(p - 1 + j, mbase) += 1.2 * std::cos(ma);
        u.x.At(p - 1 + j, mbase + 1) += 1.2 * std::sin(ma);
      }
    }
    if (echo)
      u.y = {label, label2};
    else
      u.y = {label};
    return u;
  };
  Rng lab_rng(616);
  std::vector<Utterance> data;
  std::vector<int> onset;
  for (int i = 0; i < 200; ++i) {
    int p = varpos ? (i % 2 ? 5 : 1) : (T >= 12 ? 5 : 1);
    onset.push_back(p);
    data.push_back(make_utt(1 + i % vocab, 1 + lab_rng.Int(vocab), p));
  }

  ParamSet omega;
  Rng init_rng(7);
  FoCCENet net(est, &omega, "omega", init_rng);
  AdamOptimizer opt(1e-2);
  ContextSchedule sch = MakeSchedule(4, 0, T);
  Rng order(33);
  for (int step = 0; step < steps; ++step) {
    ad::Tape tape;
    Mounted mo = MountParams(tape, omega, true);
    ad::Var total;
    for (int i = 0; i < 4; ++i) {
      const Utterance &u = data[order.Int(200)];
      FoCCENet::Densities d = net.ChiDensities(mo, u.x, u.y, sch);
      ad::Var obj = net.Objective(mo, d, static_cast<int>(u.y.size()));
      total = total.Valid() ? ad::Sub(total, obj) : ad::Neg(obj);
    }
    tape.Backward(total);
    std::vector<Tensor> g = CollectGrads(tape, mo);
    for (Tensor &t : g)
      for (int64_t j = 0; j < t.NumEl(); ++j) t[j] /= 4.0;
    opt.Step(&omega, g);
    if (step % 100 == 99) {
      if (echo) {
        // b0: noise window, v = marker echoing y1. b1: marker window,
        // v = closing carrying y2. u=1 consumed y1, u=2 consumed both.
        double d01 = 0, d02 = 0, d11 = 0, d12 = 0;
        for (int i = 0; i < 20; ++i) {
          ad::Tape vt;
          Mounted mv = MountParams(vt, omega, false);
          FoCCENet::Densities d =
              net.ChiDensities(mv, data[i].x, data[i].y, sch);
          d01 += d.log_chi.Value().At(0, 1) - d.log_chi_bar.Value()[0];
          d02 += d.log_chi.Value().At(0, 2) - d.log_chi_bar.Value()[0];
          d11 += d.log_chi.Value().At(1, 1) - d.log_chi_bar.Value()[1];
          d12 += d.log_chi.Value().At(1, 2) - d.log_chi_bar.Value()[1];
        }
        std::printf(
            "step %d echo(b0,u1)=%.3f ahead(b0,u2)=%.3f "
            "str(b1,u2)=%.3f lag(b1,u1)=%.3f\n",
            step + 1, d01 / 20, d02 / 20, d12 / 20, d11 / 20);
      } else {
        double delta = 0;
        for (int i = 0; i < 20; ++i) {
          ad::Tape vt;
          Mounted mv = MountParams(vt, omega, false);
          FoCCENet::Densities d =
              net.ChiDensities(mv, data[i].x, data[i].y, sch);
          int b = (onset[i] + 3) / 4 - 1;  // straddle boundary index
          delta += d.log_chi.Value().At(b, 1) - d.log_chi_bar.Value()[b];
        }
        std::printf("step %d mean delta(u=1) = %.3f\n", step + 1, delta / 20);
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  if (std::getenv("CAL_UNIT")) return UnitConditioning();
  int n_train = argc > 1 ? std::atoi(argv[1]) : 400;
  int n_eval = argc > 2 ? std::atoi(argv[2]) : 100;
  int epochs = argc > 3 ? std::atoi(argv[3]) : 4;
  double lr = argc > 4 ? std::atof(argv[4]) : 3e-3;
  double noise = argc > 5 ? std::atof(argv[5]) : 0.1;
  int seeds = argc > 6 ? std::atoi(argv[6]) : 5;
  int est_boost = argc > 7 ? std::atoi(argv[7]) : 0;

  TaskSpec task;
  task.vocab = 8;
  task.feature_dim = 4;
  task.min_len = 32;
  task.max_len = 64;
  task.chunk = 4;
  task.horizon = 4;  // h = C
  task.noise = noise;
  // Gap of >= 3 chunks: the previous closing leaves the encoder's receptive
  // field before the boundary ahead of the next marker.
  task.emit_rate = 0.08;
  if (const char *v = std::getenv("CAL_MINLEN")) task.min_len = std::atoi(v);
  if (const char *v = std::getenv("CAL_MAXLEN")) task.max_len = std::atoi(v);

  TransducerConfig model;
  model.feature_dim = 4;
  model.stack = 1;
  model.encoder_dim = 24;
  model.encoder_layers = 2;
  model.kernel = 3;
  model.vocab = 8;
  model.context = 2;
  model.embed_dim = 8;
  model.predictor_dim = 16;
  model.joiner_dim = 16;

  FoCCENetConfig est;
  est.feature_dim = 4;
  est.stack = 1;
  est.chunk = 4;
  est.encoder_dim = 12 + 12 * est_boost;
  est.encoder_layers = 2;
  est.kernel = 3;
  est.vocab = 8;
  est.embed_dim = 8;
  est.predictor_dim = 12 + 12 * est_boost;
  est.flow_hidden = 24 + 24 * est_boost;
  est.flow_depth = 1;
  est.flow_blocks = 2;

  std::vector<Utterance> train = SynthGenerate(task, n_train, 900001);
  std::vector<Utterance> eval = SynthGenerate(task, n_eval, 900002);

  BayesAccuracy bayes = AnalyticBayes(task, 200, 900003);
  std::printf("bayes full=%.3f streaming=%.3f\n", bayes.full,
              bayes.streaming_greedy);

  // Estimator-only loop: how much conditional signal is learnable at all,
  // independent of the joint trainer.
  if (std::getenv("CAL_EST")) {
    ParamSet omega;
    Rng init_rng(1);
    FoCCENet net(est, &omega, "omega", init_rng);
    AdamOptimizer opt(lr);
    Rng order(33);
    int steps_per = std::max(1, n_train / 8);
    for (int ep = 0; ep < epochs; ++ep) {
      for (int s = 0; s < steps_per; ++s) {
        ad::Tape tape;
        Mounted mo = MountParams(tape, omega, true);
        ad::Var total;
        for (int i = 0; i < 8; ++i) {
          const Utterance &u = train[order.Int(n_train)];
          int st = (u.x.Dim(0) + task.stack - 1) / task.stack;
          ContextSchedule sch = MakeSchedule(task.chunk, task.right, st);
          FoCCENet::Densities d = net.ChiDensities(mo, u.x, u.y, sch);
          ad::Var obj = net.Objective(mo, d, static_cast<int>(u.y.size()));
          total = total.Valid() ? ad::Sub(total, obj) : ad::Neg(obj);
        }
        tape.Backward(total);
        std::vector<Tensor> g = CollectGrads(tape, mo);
        for (Tensor &t : g)
          for (int64_t j = 0; j < t.NumEl(); ++j) t[j] /= 8.0;
        opt.Step(&omega, g);
      }
      std::printf("epoch %d\n", ep + 1);
      ProbeEstimator(net, omega, task, 40);
    }
    return 0;
  }

  std::vector<Arm> arms = {
      {"deformed", ObjectiveMode::kDeformedBaseline, 0.0},
      {"focce@0.01", ObjectiveMode::kFocceModified, 0.01},
      {"focce@0.05", ObjectiveMode::kFocceModified, 0.05},
      {"focce@0.25", ObjectiveMode::kFocceModified, 0.25},
  };
  const char *only = std::getenv("CAL_ARMS");
  for (const Arm &arm : arms) {
    if (only && arm.name.find(only) == std::string::npos) continue;
    std::vector<double> ters;
    std::printf("%-12s", arm.name.c_str());
    for (int s = 1; s <= seeds; ++s) {
      TrainConfig cfg;
      cfg.mode = arm.mode;
      cfg.lambda_gamma = arm.lambda_gamma;
      cfg.lr = lr;
      cfg.epochs = epochs;
      cfg.batch_size = 8;
      cfg.seed = static_cast<uint64_t>(s);
      cfg.lambda_chi = 1.0;
      cfg.estimator_lr = 1e-2;
      if (const char *lc = std::getenv("CAL_LCHI")) cfg.lambda_chi = std::atof(lc);
      if (const char *el = std::getenv("CAL_ESTLR"))
        cfg.estimator_lr = std::atof(el);
      if (const char *wu = std::getenv("CAL_WARMUP"))
        cfg.warmup_steps = std::atoi(wu);
      Trainer tr(model, est, cfg);
      std::vector<MetricsRecord> m = tr.Fit(train, eval);
      double ter = m.empty() ? 99.0 : m.back().ter;
      ters.push_back(ter);
      std::printf(" %.4f%s", ter, tr.Diverged() ? "(div)" : "");
      std::fflush(stdout);
      if (s == 1 && std::getenv("CAL_DECODE")) {
        std::printf("\n");
        for (int i = 0; i < 6; ++i) {
          int st = (eval[i].x.Dim(0) + task.stack - 1) / task.stack;
          ContextSchedule sch = MakeSchedule(task.chunk, task.right, st);
          DecodeTable tab =
              MakeDecodeTable(tr.Model(), tr.Theta(), eval[i].x, sch);
          std::vector<int> hyp = GreedyDecode(tab);
          std::printf("  ref:");
          for (int v : eval[i].y) std::printf(" %d", v);
          std::printf("  hyp:");
          for (int v : hyp) std::printf(" %d", v);
          std::printf("\n");
        }
      }
      if (s == 1 && std::getenv("CAL_TRACE")) {
        std::printf("\n  trace:");
        for (const MetricsRecord &r : m)
          std::printf(" e%d ter=%.3f def=%.2f gam=%.2f |", r.epoch, r.ter,
                      r.deformed_ll, r.mean_abs_log_gamma);
        std::printf("\n");
        if (tr.Estimator())
          ProbeEstimator(*tr.Estimator(), tr.Omega(), task, 40);
      }
    }
    std::printf("  median=%.4f\n", Median(ters));
  }
  return 0;
}
