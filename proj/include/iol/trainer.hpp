#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iol/errors.hpp"
#include "iol/model.hpp"
#include "iol/nn.hpp"
#include "iol/trajectory.hpp"

namespace iol {

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 20;
  int batch_size = 64;
  int mc_samples = 1;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  int patience = 10;
  int kl_warmup_epochs = 5;  // linear 0 -> 1 ramp on the KL term
  double lr_decay = 1.0;     // per-epoch learning-rate multiplier

  void validate() const {
    if (lr < 0) throw ValidationError("train.lr must be >= 0");
    if (epochs < 0) throw ValidationError("train.epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
    if (mc_samples < 1) throw ValidationError("train.mc_samples must be >= 1");
    if (clip_norm <= 0) throw ValidationError("train.clip_norm must be > 0");
    if (patience < 1) throw ValidationError("train.patience must be >= 1");
    if (kl_warmup_epochs < 0) throw ValidationError("train.kl_warmup_epochs must be >= 0");
    if (lr_decay <= 0 || lr_decay > 1) throw ValidationError("train.lr_decay must be in (0, 1]");
  }
};

struct StepStats {
  double objective = 0.0;  // nll + kl, mean per trajectory over the batch
  double nll = 0.0;
  double kl = 0.0;
};

struct EpochStats {
  int epoch = 0;  // global index; continues across resumed runs
  double train_objective = 0.0, train_nll = 0.0, train_kl = 0.0;
  double val_objective = 0.0, val_nll = 0.0, val_kl = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<StepStats> steps;
  int best_epoch = -1;  // global epoch index achieving the best validation objective
  double best_val_objective = std::numeric_limits<double>::infinity();
  double wall_seconds = 0.0;
};

struct TrainedModel {
  ModelConfig cfg;
  GenerativeParams gen;
  InferenceParams inf;
  long epochs_trained = 0;
};

struct TrainResult {
  TrainedModel model;
  TrainReport report;
};

namespace detail {

struct TrajEval {
  double nll = 0.0, kl = 0.0;
};

// Forward+backward for one trajectory; loss = nll + kl_weight * kl.
inline TrajEval eval_trajectory(GenerativeParams& gen, InferenceParams& inf,
                                const ModelConfig& cfg, const TrajectoryRecord& traj, Rng& rng,
                                int mc_samples, double kl_weight, bool with_grad) {
  ad::Tape tape;
  ElboVars ev = elbo(tape, gen, inf, cfg, traj, rng, mc_samples);
  TrajEval out;
  out.nll = -tape.scalar(ev.loglik);
  out.kl = tape.scalar(ev.kl);
  if (with_grad) {
    ad::Var nll = tape.scale(ev.loglik, -1.0);
    ad::Var loss = tape.add(nll, tape.scale(ev.kl, kl_weight));
    tape.backward(loss);
  }
  return out;
}

inline double mean_val_objective(GenerativeParams& gen, InferenceParams& inf,
                                 const ModelConfig& cfg,
                                 const std::vector<TrajectoryRecord>& val, std::uint64_t seed,
                                 int mc_samples, double* nll_out, double* kl_out) {
  double nll = 0.0, kl = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    // fixed noise per validation trajectory keeps epochs comparable
    Rng rng(mix_seed(seed, 0x7a11d, i));
    TrajEval te = eval_trajectory(gen, inf, cfg, val[i], rng, mc_samples, 1.0, false);
    nll += te.nll;
    kl += te.kl;
  }
  const double n = static_cast<double>(val.size());
  if (nll_out) *nll_out = nll / n;
  if (kl_out) *kl_out = kl / n;
  return (nll + kl) / n;
}

// Equal-length batches: trajectories are bucketed by length, shuffled within
// buckets, and emitted bucket by bucket.
inline std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<TrajectoryRecord>& train, int batch_size, Rng& rng) {
  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < train.size(); ++i) buckets[train[i].length()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, idxs] : buckets) {
    for (std::size_t i = idxs.size(); i > 1; --i)
      std::swap(idxs[i - 1], idxs[rng.below(i)]);
    for (std::size_t at = 0; at < idxs.size(); at += batch_size) {
      const std::size_t end = std::min(at + static_cast<std::size_t>(batch_size), idxs.size());
      batches.emplace_back(idxs.begin() + at, idxs.begin() + end);
    }
  }
  return batches;
}

}  // namespace detail

struct TrainInit {
  GenerativeParams gen;
  InferenceParams inf;
  long epochs_done = 0;
};

// Optional per-epoch observer, called after validation scoring.
using EpochHook = std::function<void(int epoch, GenerativeParams&, InferenceParams&,
                                     const ModelConfig&)>;

inline TrainResult train(const DatasetSplit& data, const ModelConfig& model_cfg,
                         const TrainConfig& tc, const TrainInit* resume = nullptr,
                         const EpochHook& on_epoch_end = {}) {
  tc.validate();
  if (data.train.empty()) throw ValidationError("train: training split is empty");
  detail::validate_dataset(data.train);
  const int d = data.train.front().context_dim();
  for (const auto* part : {&data.validation, &data.test})
    for (const auto& r : *part)
      if (r.context_dim() != d)
        throw ValidationError("train: trajectory '" + r.id + "' context dim mismatch");

  ModelConfig cfg = model_cfg;
  cfg.context_dim = d;

  const auto t_start = std::chrono::steady_clock::now();

  TrainResult out;
  out.model.cfg = cfg;
  long start_epoch = 0;
  if (resume) {
    out.model.gen = resume->gen;
    out.model.inf = resume->inf;
    start_epoch = resume->epochs_done;
  } else {
    Rng init_rng(mix_seed(tc.seed, 0x1271));
    out.model.gen = make_generative(cfg, init_rng);
    out.model.inf = make_inference(cfg, init_rng);
  }
  GenerativeParams& gen = out.model.gen;
  InferenceParams& inf = out.model.inf;
  ParamRefs params = all_params(gen, inf);

  AdamState adam;
  adam.init(params);

  GenerativeParams best_gen = gen;
  InferenceParams best_inf = inf;
  TrainReport& report = out.report;
  const std::vector<TrajectoryRecord>& val =
      data.validation.empty() ? data.train : data.validation;
  int epochs_since_best = 0;

  for (long ge = start_epoch; ge < tc.epochs; ++ge) {
    const double kl_weight =
        tc.kl_warmup_epochs > 0
            ? std::min(1.0, static_cast<double>(ge + 1) / static_cast<double>(tc.kl_warmup_epochs))
            : 1.0;

    Rng shuffle_rng(mix_seed(tc.seed, 0xb47c4, static_cast<std::uint64_t>(ge)));
    const auto batches = detail::make_batches(data.train, tc.batch_size, shuffle_rng);

    EpochStats es;
    es.epoch = static_cast<int>(ge);
    double epoch_nll = 0.0, epoch_kl = 0.0;
    std::size_t epoch_n = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      zero_grads(params);
      double batch_nll = 0.0, batch_kl = 0.0;
      for (std::size_t idx : batches[bi]) {
        Rng traj_rng(mix_seed(mix_seed(tc.seed, 0xe1b0, static_cast<std::uint64_t>(ge)), idx));
        detail::TrajEval te = detail::eval_trajectory(gen, inf, cfg, data.train[idx], traj_rng,
                                                      tc.mc_samples, kl_weight, true);
        if (!std::isfinite(te.nll) || !std::isfinite(te.kl))
          throw NumericalError("train: non-finite loss at epoch " + std::to_string(ge) +
                               " batch " + std::to_string(bi));
        batch_nll += te.nll;
        batch_kl += te.kl;
      }
      const double bn = static_cast<double>(batches[bi].size());
      scale_grads(params, 1.0 / bn);
      clip_global_norm(params, tc.clip_norm);
      const double lr = tc.lr * std::pow(tc.lr_decay, static_cast<double>(ge));
      adam_step(params, adam, lr);

      StepStats ss;
      ss.nll = batch_nll / bn;
      ss.kl = batch_kl / bn;
      ss.objective = ss.nll + ss.kl;
      report.steps.push_back(ss);
      epoch_nll += batch_nll;
      epoch_kl += batch_kl;
      epoch_n += batches[bi].size();
    }

    es.train_nll = epoch_nll / static_cast<double>(epoch_n);
    es.train_kl = epoch_kl / static_cast<double>(epoch_n);
    es.train_objective = es.train_nll + es.train_kl;
    es.val_objective = detail::mean_val_objective(gen, inf, cfg, val, tc.seed, tc.mc_samples,
                                                  &es.val_nll, &es.val_kl);
    report.epochs.push_back(es);
    if (on_epoch_end) on_epoch_end(static_cast<int>(ge), gen, inf, cfg);

    if (es.val_objective < report.best_val_objective) {
      report.best_val_objective = es.val_objective;
      report.best_epoch = static_cast<int>(ge);
      best_gen = gen;
      best_inf = inf;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= tc.patience) break;
    }
  }

  if (report.best_epoch >= 0) {
    gen = best_gen;
    inf = best_inf;
  }
  out.model.epochs_trained = report.epochs.empty()
                                 ? start_epoch
                                 : static_cast<long>(report.epochs.back().epoch) + 1;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

// Posterior-mean beliefs per step; pass an Rng to draw reparameterized
// samples instead of propagating means.
struct InferredStep {
  EffectBelief belief;
  DiagGaussian memory;
};

inline std::vector<InferredStep> infer_beliefs(GenerativeParams& gen, InferenceParams& inf,
                                               const ModelConfig& cfg,
                                               const TrajectoryRecord& traj,
                                               Rng* sample_rng = nullptr) {
  if (traj.context_dim() != cfg.context_dim)
    throw ValidationError("infer_beliefs: context dim mismatch for trajectory '" + traj.id + "'");
  const int T = traj.length();
  ad::Tape tape;
  const std::vector<ad::Var> b = backward_summaries(tape, inf, traj);
  std::vector<InferredStep> out;
  out.reserve(T);
  std::optional<ad::Var> m_prev;
  for (int t = 1; t <= T; ++t) {
    const int b_idx = (t == 1) ? 0 : (cfg.posterior_uses_current_summary ? t - 1 : t - 2);
    const GaussVar q = posterior_step(tape, inf, cfg, m_prev, b[b_idx]);
    ad::Var m_t = q.mean;
    if (sample_rng) {
      const MatrixXd eps = MatrixXd::NullaryExpr(
          cfg.memory_dim, 1, [&](Eigen::Index, Eigen::Index) { return sample_rng->normal(); });
      m_t = tape.reparam_sample(q.mean, q.std, eps);
    }
    InferredStep step;
    step.memory = DiagGaussian{tape.val(q.mean).col(0), tape.val(q.std).col(0)};
    step.belief = decode_effect(gen, cfg, tape.val(m_t).col(0),
                                Eigen::Map<const VectorXd>(traj.steps[t - 1].x.data(),
                                                           static_cast<Eigen::Index>(traj.steps[t - 1].x.size())));
    step.belief.t = t;
    out.push_back(std::move(step));
    m_prev = m_t;
  }
  return out;
}

// Canonical report serialization; wall-clock is excluded from the
// deterministic payload and carried as a separate trailing field.
inline std::string report_to_json(const TrainReport& r, bool include_wall = true) {
  std::string out = "{\"best_epoch\": " + std::to_string(r.best_epoch) +
                    ", \"best_val_objective\": " + format_double(r.best_val_objective) +
                    ", \"epochs\": [";
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    const EpochStats& e = r.epochs[i];
    if (i) out += ", ";
    out += "{\"epoch\": " + std::to_string(e.epoch) +
           ", \"train_objective\": " + format_double(e.train_objective) +
           ", \"train_nll\": " + format_double(e.train_nll) +
           ", \"train_kl\": " + format_double(e.train_kl) +
           ", \"val_objective\": " + format_double(e.val_objective) +
           ", \"val_nll\": " + format_double(e.val_nll) +
           ", \"val_kl\": " + format_double(e.val_kl) + "}";
  }
  out += "], \"steps\": [";
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepStats& s = r.steps[i];
    if (i) out += ", ";
    out += "{\"objective\": " + format_double(s.objective) + ", \"nll\": " + format_double(s.nll) +
           ", \"kl\": " + format_double(s.kl) + "}";
  }
  out += "]";
  if (include_wall) out += ", \"wall_seconds\": " + format_double(r.wall_seconds);
  out += "}\n";
  return out;
}

}  // namespace iol
