#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iol/errors.hpp"
#include "iol/nn.hpp"
#include "iol/rng.hpp"
#include "iol/tape.hpp"
#include "iol/trajectory.hpp"

namespace iol {

// ---------------------------------------------------------------------------
// Pooled step view: baselines are stationary and ignore trajectory structure.
// ---------------------------------------------------------------------------

struct StepDataset {
  MatrixXd X;             // d x N, one column per step
  Eigen::RowVectorXd a;   // actions in {0,1}
  Eigen::RowVectorXd y;   // outcomes

  Eigen::Index size() const { return X.cols(); }
  int dim() const { return static_cast<int>(X.rows()); }
};

inline StepDataset pool_steps(const std::vector<TrajectoryRecord>& trajs) {
  std::size_t n = 0;
  for (const auto& t : trajs) n += t.steps.size();
  if (n == 0) throw ValidationError("pool_steps: no steps");
  const int d = trajs.front().context_dim();
  StepDataset ds;
  ds.X.resize(d, static_cast<Eigen::Index>(n));
  ds.a.resize(static_cast<Eigen::Index>(n));
  ds.y.resize(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (const auto& t : trajs)
    for (const auto& s : t.steps) {
      for (int i = 0; i < d; ++i) ds.X(i, k) = s.x[i];
      ds.a(k) = static_cast<double>(s.a);
      ds.y(k) = s.y;
      ++k;
    }
  return ds;
}

namespace detail {

inline void require_both_classes(const Eigen::RowVectorXd& a, const char* who) {
  const double n1 = a.sum();
  if (n1 == 0.0 || n1 == static_cast<double>(a.size()))
    throw ValidationError(std::string(who) + ": training data contains a single action class");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Behavioural cloning, linear: logistic regression by full-batch gradient
// descent with step halving, run until the loss delta falls below tol.
// ---------------------------------------------------------------------------

struct LinearPolicy {
  VectorXd w;
  double b = 0.0;

  Eigen::RowVectorXd predict_proba(const MatrixXd& X) const {
    Eigen::RowVectorXd z = (w.transpose() * X).array() + b;
    return z.unaryExpr([](double v) { return ad::sigmoid_stable(v); });
  }
};

inline LinearPolicy fit_bc_linear(const StepDataset& ds, double tol = 1e-8,
                                  long max_iters = 200000) {
  detail::require_both_classes(ds.a, "fit_bc_linear");
  const int d = ds.dim();
  const double n = static_cast<double>(ds.size());
  VectorXd w = VectorXd::Zero(d);
  double b = 0.0;

  auto loss_at = [&](const VectorXd& wv, double bv) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < ds.size(); ++j) {
      const double z = wv.dot(ds.X.col(j)) + bv;
      total += ad::softplus_stable(z) - ds.a(j) * z;
    }
    return total / n;
  };

  double lr = 1.0;
  double loss = loss_at(w, b);
  for (long it = 0; it < max_iters; ++it) {
    Eigen::RowVectorXd z = (w.transpose() * ds.X).array() + b;
    Eigen::RowVectorXd p = z.unaryExpr([](double v) { return ad::sigmoid_stable(v); });
    const Eigen::RowVectorXd r = (p - ds.a) / n;
    const VectorXd gw = ds.X * r.transpose();
    const double gb = r.sum();

    double new_loss;
    while (true) {
      const VectorXd w_try = w - lr * gw;
      const double b_try = b - lr * gb;
      new_loss = loss_at(w_try, b_try);
      if (new_loss <= loss || lr < 1e-12) {
        w = w_try;
        b = b_try;
        break;
      }
      lr *= 0.5;
    }
    lr *= 1.1;  // recover step size after halvings
    if (std::abs(loss - new_loss) < tol) {
      loss = new_loss;
      break;
    }
    loss = new_loss;
  }
  return LinearPolicy{w, b};
}

// ---------------------------------------------------------------------------
// Deep variants share a minibatch Adam loop over a tape-built loss.
// ---------------------------------------------------------------------------

struct DeepFitConfig {
  int hidden = 64;
  double lr = 1e-3;
  int batch_size = 1024;
  int max_epochs = 80;
  double tol = 1e-7;  // on the epoch-mean loss delta
  std::uint64_t seed = 0;
};

namespace detail {

// loss_fn builds the scalar loss for one minibatch on the tape.
template <typename LossFn>
inline void fit_minibatch_adam(Mlp& net, const StepDataset& ds, const DeepFitConfig& cfg,
                               LossFn&& loss_fn) {
  ParamRefs params = net.params();
  AdamState adam;
  adam.init(params);
  Rng shuffle_rng(mix_seed(cfg.seed, 0xdee9));
  std::vector<Eigen::Index> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  double prev_epoch_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (Eigen::Index at = 0; at < ds.size(); at += cfg.batch_size) {
      const Eigen::Index bn = std::min<Eigen::Index>(cfg.batch_size, ds.size() - at);
      MatrixXd Xb(ds.dim(), bn);
      Eigen::RowVectorXd ab(bn);
      for (Eigen::Index j = 0; j < bn; ++j) {
        Xb.col(j) = ds.X.col(order[at + j]);
        ab(j) = ds.a(order[at + j]);
      }
      zero_grads(params);
      ad::Tape tape;
      ad::Var loss = loss_fn(tape, Xb, ab);
      tape.backward(loss);
      adam_step(params, adam, cfg.lr);
      epoch_loss += tape.scalar(loss);
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(n_batches);
    if (std::abs(prev_epoch_loss - epoch_loss) < cfg.tol) break;
    prev_epoch_loss = epoch_loss;
  }
}

}  // namespace detail

// One-hidden-layer MLP classifier.
struct MlpPolicy {
  Mlp net;

  Eigen::RowVectorXd predict_proba(const MatrixXd& X) {
    ad::Tape tape;
    ad::Var z = mlp_forward(tape, net, tape.constant(X));
    return tape.val(z).row(0).unaryExpr([](double v) { return ad::sigmoid_stable(v); });
  }
};

inline MlpPolicy fit_bc_deep(const StepDataset& ds, DeepFitConfig cfg = {}) {
  detail::require_both_classes(ds.a, "fit_bc_deep");
  Rng init_rng(mix_seed(cfg.seed, 0xbcdee9));
  MlpPolicy policy;
  policy.net = make_mlp("bc_deep", {ds.dim(), cfg.hidden, 1}, init_rng);
  detail::fit_minibatch_adam(policy.net, ds, cfg,
                             [&](ad::Tape& tape, const MatrixXd& Xb, const Eigen::RowVectorXd& ab) {
                               ad::Var z = mlp_forward(tape, policy.net, tape.constant(Xb));
                               return tape.bce_with_logits_mean(z, ab);
                             });
  return policy;
}

// Reward-regularised classification: a two-head score network Q(x, .) with an
// L1 penalty on the implied one-step reward Q(x,1) - Q(x,0).
struct RcalPolicy {
  Mlp net;  // two outputs: row 0 = Q(x,0), row 1 = Q(x,1)

  Eigen::RowVectorXd score_gap(const MatrixXd& X) {
    ad::Tape tape;
    ad::Var q = mlp_forward(tape, net, tape.constant(X));
    return tape.val(q).row(1) - tape.val(q).row(0);
  }

  Eigen::RowVectorXd predict_proba(const MatrixXd& X) {
    return score_gap(X).unaryExpr([](double v) { return ad::sigmoid_stable(v); });
  }
};

inline RcalPolicy fit_rcal(const StepDataset& ds, double reward_l1 = 0.01, DeepFitConfig cfg = {}) {
  detail::require_both_classes(ds.a, "fit_rcal");
  Rng init_rng(mix_seed(cfg.seed, 0xbcdee9));
  RcalPolicy policy;
  policy.net = make_mlp("rcal", {ds.dim(), cfg.hidden, 2}, init_rng);
  detail::fit_minibatch_adam(policy.net, ds, cfg,
                             [&](ad::Tape& tape, const MatrixXd& Xb, const Eigen::RowVectorXd& ab) {
                               ad::Var q = mlp_forward(tape, policy.net, tape.constant(Xb));
                               ad::Var gap = tape.sub(tape.segment(q, 1, 1), tape.segment(q, 0, 1));
                               ad::Var ce = tape.bce_with_logits_mean(gap, ab);
                               if (reward_l1 == 0.0) return ce;
                               return tape.add(ce, tape.scale(tape.mean_all(tape.vabs(gap)), reward_l1));
                             });
  return policy;
}

// CIRL adapted to the one-step bandit: ridge-regress each arm's outcome, score
// by the estimated CATE, and act greedily on its sign.
struct CirlPolicy {
  VectorXd w1, w0;  // last coefficient is the intercept

  Eigen::RowVectorXd predict_tau(const MatrixXd& X) const {
    const VectorXd dw = w1 - w0;
    Eigen::RowVectorXd tau = dw.head(X.rows()).transpose() * X;
    tau.array() += dw(X.rows());
    return tau;
  }

  Eigen::RowVectorXd predict_proba(const MatrixXd& X) const {
    return predict_tau(X).unaryExpr([](double v) { return ad::sigmoid_stable(v); });
  }
};

inline CirlPolicy fit_cirl_bandit(const StepDataset& ds, double ridge = 1e-3) {
  const int d = ds.dim();
  CirlPolicy policy;
  for (int arm = 0; arm <= 1; ++arm) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < ds.size(); ++j)
      if (static_cast<int>(ds.a(j)) == arm) idx.push_back(j);
    if (idx.empty())
      throw ValidationError("fit_cirl_bandit: arm " + std::to_string(arm) + " was never observed");
    MatrixXd Xa(d + 1, static_cast<Eigen::Index>(idx.size()));
    VectorXd ya(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Xa.col(static_cast<Eigen::Index>(k)).head(d) = ds.X.col(idx[k]);
      Xa(d, static_cast<Eigen::Index>(k)) = 1.0;
      ya(static_cast<Eigen::Index>(k)) = ds.y(idx[k]);
    }
    const MatrixXd G = Xa * Xa.transpose() + ridge * MatrixXd::Identity(d + 1, d + 1);
    const VectorXd rhs = Xa * ya;
    VectorXd w = G.ldlt().solve(rhs);
    if (arm == 1)
      policy.w1 = w;
    else
      policy.w0 = w;
  }
  return policy;
}

// ---------------------------------------------------------------------------
// Metrics: ACC at 0.5, rank AUC with tie midranks, average precision as the
// area under the precision-recall step curve, mean binary cross-entropy.
// ---------------------------------------------------------------------------

struct BinaryMetrics {
  double acc = 0.0, auc = 0.0, aps = 0.0, nll = 0.0;
  bool auc_defined = true;  // false when the labels contain one class only
};

inline double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }
  double n1 = 0.0, rank_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k] > 0) {
      n1 += 1.0;
      rank_sum += rank[k];
    }
  const double n0 = static_cast<double>(n) - n1;
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

// AP = sum over descending distinct thresholds of (R_k - R_{k-1}) * P_k.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  double n_pos = 0.0;
  for (int l : labels) n_pos += (l > 0);
  double tp = 0.0, fp = 0.0, ap = 0.0, prev_recall = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] > 0)
        tp += 1.0;
      else
        fp += 1.0;
      ++j;
    }
    const double precision = tp / (tp + fp);
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

inline BinaryMetrics evaluate_scores(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ValidationError("evaluate_scores: scores and labels must be non-empty and aligned");
  const std::size_t n = scores.size();
  double n_pos = 0.0;
  for (int l : labels) n_pos += (l > 0);

  BinaryMetrics m;
  double correct = 0.0, nll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int pred = scores[i] >= 0.5 ? 1 : 0;
    correct += (pred == labels[i]);
    const double p = std::clamp(scores[i], 1e-12, 1.0 - 1e-12);
    nll += labels[i] > 0 ? -std::log(p) : -std::log(1.0 - p);
  }
  m.acc = correct / static_cast<double>(n);
  m.nll = nll / static_cast<double>(n);
  if (n_pos == 0.0 || n_pos == static_cast<double>(n)) {
    m.auc_defined = false;
    m.auc = std::numeric_limits<double>::quiet_NaN();
    m.aps = std::numeric_limits<double>::quiet_NaN();
  } else {
    m.auc = rank_auc(scores, labels);
    m.aps = average_precision(scores, labels);
  }
  return m;
}

// Mean and std over evaluation repetitions.
struct MetricReport {
  double acc = 0, acc_std = 0, auc = 0, auc_std = 0, aps = 0, aps_std = 0, nll = 0, nll_std = 0;
  bool auc_defined = true;
  int repetitions = 0;
};

inline std::string metric_report_to_json(const MetricReport& r) {
  auto num = [](double v) {
    return std::isfinite(v) ? format_double(v) : std::string("null");
  };
  return "{\"acc\": " + num(r.acc) + ", \"acc_std\": " + num(r.acc_std) +
         ", \"auc\": " + num(r.auc) + ", \"auc_std\": " + num(r.auc_std) +
         ", \"aps\": " + num(r.aps) + ", \"aps_std\": " + num(r.aps_std) +
         ", \"nll\": " + num(r.nll) + ", \"nll_std\": " + num(r.nll_std) +
         ", \"auc_defined\": " + (r.auc_defined ? "true" : "false") +
         ", \"repetitions\": " + std::to_string(r.repetitions) + "}";
}

inline MetricReport aggregate_metrics(const std::vector<BinaryMetrics>& runs) {
  if (runs.empty()) throw ValidationError("aggregate_metrics: no runs");
  MetricReport r;
  r.repetitions = static_cast<int>(runs.size());
  for (const auto& m : runs) r.auc_defined = r.auc_defined && m.auc_defined;
  auto stats = [&](auto get, double& mean, double& sd) {
    double s = 0.0;
    for (const auto& m : runs) s += get(m);
    mean = s / runs.size();
    double v = 0.0;
    for (const auto& m : runs) v += (get(m) - mean) * (get(m) - mean);
    sd = runs.size() > 1 ? std::sqrt(v / runs.size()) : 0.0;
  };
  stats([](const BinaryMetrics& m) { return m.acc; }, r.acc, r.acc_std);
  stats([](const BinaryMetrics& m) { return m.nll; }, r.nll, r.nll_std);
  if (r.auc_defined) {
    stats([](const BinaryMetrics& m) { return m.auc; }, r.auc, r.auc_std);
    stats([](const BinaryMetrics& m) { return m.aps; }, r.aps, r.aps_std);
  } else {
    r.auc = r.aps = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace iol
