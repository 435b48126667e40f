#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iol/errors.hpp"
#include "iol/forward_sim.hpp"
#include "iol/io_util.hpp"
#include "iol/trainer.hpp"

namespace iol {

// ---------------------------------------------------------------------------
// Time-binned relative decoder weights.
// ---------------------------------------------------------------------------

struct WeightTimelineBin {
  int bin_index = 0;
  int t_lo = 0, t_hi = 0;  // inclusive step range
  bool empty = false;
  std::vector<double> relative_weight;  // per feature; sums to 1 unless empty
};

struct WeightTimeline {
  std::vector<WeightTimelineBin> bins;
};

// Core binning over any (t, weights) series; lets ground-truth weight logs be
// summarized with the same arithmetic as inferred ones.
inline WeightTimeline weight_timeline_from_series(
    const std::vector<std::pair<int, VectorXd>>& series, int n_bins, int t_max) {
  if (n_bins < 1) throw ValidationError("weight_timeline: n_bins must be >= 1");
  if (series.empty()) throw ValidationError("weight_timeline: empty series");
  const int d = static_cast<int>(series.front().second.size());
  WeightTimeline out;
  out.bins.resize(n_bins);
  std::vector<VectorXd> sums(n_bins, VectorXd::Zero(d));
  std::vector<long> counts(n_bins, 0);
  for (const auto& [t, w] : series) {
    int bin = static_cast<int>((static_cast<long>(t) - 1) * n_bins / std::max(t_max, 1));
    bin = std::clamp(bin, 0, n_bins - 1);
    sums[bin] += w.cwiseAbs();
    ++counts[bin];
  }
  for (int b = 0; b < n_bins; ++b) {
    WeightTimelineBin& bin = out.bins[b];
    bin.bin_index = b;
    bin.t_lo = b * t_max / n_bins + 1;
    bin.t_hi = (b + 1) * t_max / n_bins;
    bin.relative_weight.assign(d, 0.0);
    if (counts[b] == 0) {
      bin.empty = true;
      continue;
    }
    VectorXd mean = sums[b] / static_cast<double>(counts[b]);
    const double l1 = mean.lpNorm<1>();
    if (l1 > 0) mean /= l1;
    for (int i = 0; i < d; ++i) bin.relative_weight[i] = mean(i);
  }
  return out;
}

inline WeightTimeline weight_timelines(TrainedModel& model,
                                       const std::vector<TrajectoryRecord>& trajs, int n_bins) {
  std::vector<std::pair<int, VectorXd>> series;
  int t_max = 0;
  for (const auto& traj : trajs) t_max = std::max(t_max, traj.length());
  for (const auto& traj : trajs) {
    auto steps = infer_beliefs(model.gen, model.inf, model.cfg, traj);
    for (const auto& s : steps) series.emplace_back(s.belief.t, s.belief.omega1);
  }
  return weight_timeline_from_series(series, n_bins, t_max);
}

// ---------------------------------------------------------------------------
// One-step policy shift after observing an outcome.
// ---------------------------------------------------------------------------

enum class ShiftMode {
  ObservedContext,  // tau_{t+1}(x_t) - tau_t(x_t), change at the just-seen context
  ReferencePanel,   // mean change over a fixed panel of reference contexts
};

struct ShiftSample {
  std::string traj_id;
  int t = 0;                  // 1-based step whose outcome triggered the shift
  int action = 0;
  bool outcome_positive = false;  // standardized outcome >= 0
  double shift = 0.0;
};

inline std::vector<ShiftSample> policy_shift_series(TrainedModel& model,
                                                    const std::vector<TrajectoryRecord>& trajs,
                                                    ShiftMode mode = ShiftMode::ObservedContext,
                                                    int panel_size = 32) {
  MatrixXd panel;
  if (mode == ShiftMode::ReferencePanel) {
    Rng rng(0x9a4e1);
    panel = MatrixXd::NullaryExpr(model.cfg.context_dim, panel_size,
                                  [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  }
  std::vector<ShiftSample> out;
  for (const auto& traj : trajs) {
    auto steps = infer_beliefs(model.gen, model.inf, model.cfg, traj);
    for (int t = 0; t + 1 < traj.length(); ++t) {
      const VectorXd dw = steps[t + 1].belief.omega1 - steps[t].belief.omega1;
      double shift;
      if (mode == ShiftMode::ObservedContext) {
        const auto& xv = traj.steps[t].x;
        shift = Eigen::Map<const VectorXd>(xv.data(), static_cast<Eigen::Index>(xv.size())).dot(dw);
      } else {
        shift = (dw.transpose() * panel).mean();
      }
      ShiftSample s;
      s.traj_id = traj.id;
      s.t = t + 1;
      s.action = traj.steps[t].a;
      s.outcome_positive = traj.steps[t].y >= 0.0;
      s.shift = shift;
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Belief recovery against a simulator ground-truth log.
// ---------------------------------------------------------------------------

// Fraction of sign agreements over (inferred, true) pairs; exact zeros on
// either side are excluded from the denominator.
inline double sign_agreement(const std::vector<std::pair<double, double>>& pairs) {
  long ok = 0, total = 0;
  for (const auto& [inferred, truth] : pairs) {
    if (inferred == 0.0 || truth == 0.0) continue;
    ok += (inferred > 0) == (truth > 0);
    ++total;
  }
  if (total == 0) throw ValidationError("sign_agreement: no decidable pairs");
  return static_cast<double>(ok) / static_cast<double>(total);
}

inline double belief_recovery_score(TrainedModel& model,
                                    const std::vector<TrajectoryRecord>& corpus,
                                    const std::vector<BeliefTrajectory>& beliefs_log) {
  std::map<std::string, const BeliefTrajectory*> by_id;
  for (const auto& b : beliefs_log) by_id[b.id] = &b;
  std::vector<std::pair<double, double>> pairs;
  for (const auto& traj : corpus) {
    auto it = by_id.find(traj.id);
    if (it == by_id.end())
      throw ValidationError("belief_recovery_score: no beliefs logged for trajectory '" +
                            traj.id + "'");
    const BeliefTrajectory& bt = *it->second;
    if (static_cast<int>(bt.steps.size()) != traj.length())
      throw ValidationError("belief_recovery_score: step count mismatch for trajectory '" +
                            traj.id + "'");
    auto steps = infer_beliefs(model.gen, model.inf, model.cfg, traj);
    for (int t = 0; t < traj.length(); ++t)
      pairs.emplace_back(steps[t].belief.tau, bt.steps[t].tau);
  }
  return sign_agreement(pairs);
}

// ---------------------------------------------------------------------------
// CSV exports; deterministic row order (trajectory id order, then t).
// ---------------------------------------------------------------------------

inline void export_weights_csv(const WeightTimeline& tl, const std::string& path) {
  std::string out = "bin,feature_index,feature_name,relative_weight\n";
  for (const auto& bin : tl.bins)
    for (std::size_t i = 0; i < bin.relative_weight.size(); ++i)
      out += std::to_string(bin.bin_index) + "," + std::to_string(i) + ",x_" + std::to_string(i) +
             "," + (bin.empty ? "nan" : format_double(bin.relative_weight[i])) + "\n";
  write_text_file(path, out);
}

inline void export_shifts_csv(const std::vector<ShiftSample>& shifts, const std::string& path) {
  std::string out = "traj_id,t,action,outcome_bucket,shift\n";
  for (const auto& s : shifts)
    out += s.traj_id + "," + std::to_string(s.t) + "," + std::to_string(s.action) + "," +
           (s.outcome_positive ? "positive" : "negative") + "," + format_double(s.shift) + "\n";
  write_text_file(path, out);
}

inline void export_beliefs_csv(TrainedModel& model, const std::vector<TrajectoryRecord>& trajs,
                               const std::string& path) {
  std::string out = "traj_id,t,tau_inferred,pi";
  for (int i = 0; i < model.cfg.context_dim; ++i) out += ",omega_" + std::to_string(i);
  out += "\n";
  for (const auto& traj : trajs) {
    auto steps = infer_beliefs(model.gen, model.inf, model.cfg, traj);
    for (const auto& s : steps) {
      out += traj.id + "," + std::to_string(s.belief.t) + "," + format_double(s.belief.tau) + "," +
             format_double(s.belief.pi);
      for (int i = 0; i < model.cfg.context_dim; ++i) out += "," + format_double(s.belief.omega1(i));
      out += "\n";
    }
  }
  write_text_file(path, out);
}

}  // namespace iol
