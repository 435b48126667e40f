#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iol/errors.hpp"
#include "iol/gaussian.hpp"
#include "iol/nn.hpp"
#include "iol/rng.hpp"
#include "iol/tape.hpp"
#include "iol/trajectory.hpp"

namespace iol {

struct ModelConfig {
  int context_dim = 0;
  int memory_dim = 16;
  int hidden = 64;           // width of the MLP heads
  int lstm_hidden = 64;      // backward summarizer state size
  int transition_depth = 2;  // hidden layers in the transition net
  int head_depth = 2;        // hidden layers in the posterior heads
  double std_floor = 1e-4;
  // q(m_t) conditions on the summary covering h_{t-1:T}; this switches to the
  // one covering h_{t:T} instead.
  bool posterior_uses_current_summary = false;
};

// Generative side: memory transition, weight decoder, treatment rule.
struct GenerativeParams {
  Mlp transition_net;     // [m, x, a, y] -> (mean_raw, std_raw)
  Mlp decoder_net;        // m -> omega_1
  ParamTensor alpha_raw;  // alpha = softplus(alpha_raw) keeps the rule monotone
  ParamTensor beta;

  ParamRefs params() {
    ParamRefs out = transition_net.params();
    for (ParamTensor* p : decoder_net.params()) out.push_back(p);
    out.push_back(&alpha_raw);
    out.push_back(&beta);
    return out;
  }

  double alpha() const { return ad::softplus_stable(alpha_raw.value(0, 0)); }
  double beta_value() const { return beta.value(0, 0); }
};

// Inference side: backward summarizer plus the posterior heads.
struct InferenceParams {
  LstmCell backward_cell;  // consumes [x, a, y] from T down to 1
  Mlp head_net;            // [m_prev, b] -> (mean_raw, std_raw)
  Mlp init_head;           // b_1 -> (mean_raw, std_raw)

  ParamRefs params() {
    ParamRefs out = backward_cell.params();
    for (ParamTensor* p : head_net.params()) out.push_back(p);
    for (ParamTensor* p : init_head.params()) out.push_back(p);
    return out;
  }
};

// Per-step decoded belief. mu0 is identically zero by the identifiability
// constraint, so tau == mu1.
struct EffectBelief {
  int t = 0;  // 1-based
  VectorXd omega1;
  double mu1 = 0.0, mu0 = 0.0, tau = 0.0, pi = 0.5;
};

// std heads start tight so early ancestral sampling stays low-noise
inline constexpr double kStdHeadBiasInit = -1.5;

inline void init_std_head(Mlp& net, int memory_dim) {
  for (int i = 0; i < memory_dim; ++i)
    net.layers.back().b.value(memory_dim + i, 0) = kStdHeadBiasInit;
}

inline GenerativeParams make_generative(const ModelConfig& cfg, Rng& rng) {
  GenerativeParams gen;
  std::vector<int> tdims{cfg.memory_dim + cfg.context_dim + 2};
  for (int i = 0; i < std::max(1, cfg.transition_depth); ++i) tdims.push_back(cfg.hidden);
  tdims.push_back(2 * cfg.memory_dim);
  gen.transition_net = make_mlp("gen.transition", tdims, rng);
  init_std_head(gen.transition_net, cfg.memory_dim);
  gen.decoder_net = make_mlp("gen.decoder", {cfg.memory_dim, cfg.hidden, cfg.context_dim}, rng);
  // softplus(alpha_raw) == 1 at init
  MatrixXd a(1, 1);
  a(0, 0) = std::log(std::exp(1.0) - 1.0);
  gen.alpha_raw = ParamTensor("gen.alpha_raw", std::move(a));
  gen.beta = ParamTensor("gen.beta", MatrixXd::Zero(1, 1));
  return gen;
}

inline InferenceParams make_inference(const ModelConfig& cfg, Rng& rng) {
  InferenceParams inf;
  inf.backward_cell = make_lstm("inf.lstm", cfg.context_dim + 2, cfg.lstm_hidden, rng);
  auto head_dims = [&](int in) {
    std::vector<int> dims{in};
    for (int i = 0; i < std::max(1, cfg.head_depth); ++i) dims.push_back(cfg.hidden);
    dims.push_back(2 * cfg.memory_dim);
    return dims;
  };
  inf.head_net = make_mlp("inf.head", head_dims(cfg.memory_dim + cfg.lstm_hidden), rng);
  inf.init_head = make_mlp("inf.init", head_dims(cfg.lstm_hidden), rng);
  init_std_head(inf.head_net, cfg.memory_dim);
  init_std_head(inf.init_head, cfg.memory_dim);
  return inf;
}

inline ParamRefs all_params(GenerativeParams& gen, InferenceParams& inf) {
  ParamRefs out = gen.params();
  for (ParamTensor* p : inf.params()) out.push_back(p);
  return out;
}

// Fixed standard-normal initial memory prior p(m_1).
inline DiagGaussian prior_initial(const ModelConfig& cfg) {
  return standard_gaussian(cfg.memory_dim);
}

namespace detail {

inline VectorXd step_vec(const StepRecord& s) {
  VectorXd v(s.x.size() + 2);
  for (std::size_t i = 0; i < s.x.size(); ++i) v[i] = s.x[i];
  v[s.x.size()] = static_cast<double>(s.a);
  v[s.x.size() + 1] = s.y;
  return v;
}

}  // namespace detail

struct GaussVar {
  ad::Var mean, std;
};

// Splits a 2m head output into mean and softplus-floored std.
inline GaussVar gauss_from_head(ad::Tape& tape, ad::Var head, int memory_dim, double std_floor) {
  ad::Var mean = tape.segment(head, 0, memory_dim);
  ad::Var std = tape.add_scalar(tape.vsoftplus(tape.segment(head, memory_dim, memory_dim)), std_floor);
  return {mean, std};
}

// Transition prior p(m_t | m_{t-1}, x_{t-1}, a_{t-1}, y_{t-1}). The step-t
// context never enters: the memory is formed before x_t arrives.
inline GaussVar memory_transition(ad::Tape& tape, GenerativeParams& gen, const ModelConfig& cfg,
                                  ad::Var m_prev, const StepRecord& step_prev) {
  ad::Var in = tape.concat({m_prev, tape.constant(detail::step_vec(step_prev))});
  ad::Var head = mlp_forward(tape, gen.transition_net, in);
  return gauss_from_head(tape, head, cfg.memory_dim, cfg.std_floor);
}

struct EffectVars {
  ad::Var omega;  // decoded weights for action 1
  ad::Var tau;    // scalar perceived effect (mu0 == 0 identically)
};

inline EffectVars decode_effect_vars(ad::Tape& tape, GenerativeParams& gen, ad::Var m,
                                     const VectorXd& x) {
  ad::Var omega = mlp_forward(tape, gen.decoder_net, m);
  ad::Var tau = tape.dot_const(omega, x);
  return {omega, tau};
}

inline EffectBelief decode_effect(GenerativeParams& gen, const ModelConfig& cfg, const VectorXd& m,
                                  const VectorXd& x) {
  if (m.size() != cfg.memory_dim) throw ValidationError("decode_effect: memory dim mismatch");
  if (x.size() != cfg.context_dim) throw ValidationError("decode_effect: context dim mismatch");
  ad::Tape tape;
  EffectVars ev = decode_effect_vars(tape, gen, tape.constant(m), x);
  EffectBelief b;
  b.omega1 = tape.val(ev.omega).col(0);
  b.mu1 = tape.scalar(ev.tau);
  b.mu0 = 0.0;
  b.tau = b.mu1 - b.mu0;
  b.pi = ad::sigmoid_stable(gen.alpha() * (b.tau - gen.beta_value()));
  return b;
}

// log pi(a | tau) under the soft treatment rule; stable over the whole range.
inline double action_log_likelihood(const GenerativeParams& gen, double tau, int a) {
  const double z = gen.alpha() * (tau - gen.beta_value());
  return (a == 1) ? -ad::softplus_stable(-z) : -ad::softplus_stable(z);
}

inline ad::Var action_likelihood(ad::Tape& tape, GenerativeParams& gen, ad::Var tau, int a) {
  ad::Var alpha = tape.vsoftplus(tape.param(gen.alpha_raw));
  ad::Var z = tape.scalar_mul(alpha, tape.sub(tau, tape.param(gen.beta)));
  return tape.log_bernoulli(z, a);
}

// Backward summaries b_t = LSTM(h_{t:T}); returned indexed by t-1.
inline std::vector<ad::Var> backward_summaries(ad::Tape& tape, InferenceParams& inf,
                                               const TrajectoryRecord& traj) {
  const int T = traj.length();
  std::vector<ad::Var> b(T);
  LstmState state = lstm_initial_state(tape, inf.backward_cell);
  for (int t = T; t >= 1; --t) {
    ad::Var in = tape.constant(detail::step_vec(traj.steps[t - 1]));
    state = recurrent_step(tape, inf.backward_cell, state, in);
    b[t - 1] = state.h;
  }
  return b;
}

// q(m_1 | b) via the init head, q(m_t | m_{t-1}, b) via the shared head.
inline GaussVar posterior_step(ad::Tape& tape, InferenceParams& inf, const ModelConfig& cfg,
                               std::optional<ad::Var> m_prev, ad::Var b) {
  ad::Var head = m_prev.has_value()
                     ? mlp_forward(tape, inf.head_net, tape.concat({*m_prev, b}))
                     : mlp_forward(tape, inf.init_head, b);
  return gauss_from_head(tape, head, cfg.memory_dim, cfg.std_floor);
}

struct ElboVars {
  ad::Var elbo;    // loglik - kl
  ad::Var loglik;  // sum_t log pi(a_t | tau_t)
  ad::Var kl;      // sum_t KL(q_t || p_t)
};

// Single-sample ancestral ELBO estimate, averaged over mc_samples passes.
// Gradients flow through the reparameterized samples into both (theta, phi).
inline ElboVars elbo(ad::Tape& tape, GenerativeParams& gen, InferenceParams& inf,
                     const ModelConfig& cfg, const TrajectoryRecord& traj, Rng& rng,
                     int mc_samples = 1) {
  if (mc_samples < 1) throw ValidationError("elbo: mc_samples must be >= 1");
  if (traj.context_dim() != cfg.context_dim)
    throw ValidationError("elbo: trajectory dim " + std::to_string(traj.context_dim()) +
                          " does not match model dim " + std::to_string(cfg.context_dim));
  const int T = traj.length();
  const std::vector<ad::Var> b = backward_summaries(tape, inf, traj);
  const DiagGaussian p1 = prior_initial(cfg);
  const ad::Var p1_mean = tape.constant(p1.mean);
  const ad::Var p1_std = tape.constant(p1.std);

  ad::Var loglik_total, kl_total;
  for (int k = 0; k < mc_samples; ++k) {
    ad::Var loglik, kl;
    std::optional<ad::Var> m_prev;
    for (int t = 1; t <= T; ++t) {
      const int b_idx = (t == 1) ? 0 : (cfg.posterior_uses_current_summary ? t - 1 : t - 2);
      const GaussVar q = posterior_step(tape, inf, cfg, m_prev, b[b_idx]);
      GaussVar prior;
      if (t == 1) {
        prior = {p1_mean, p1_std};
      } else {
        prior = memory_transition(tape, gen, cfg, *m_prev, traj.steps[t - 2]);
      }
      const ad::Var kl_t = tape.kl_diag(q.mean, q.std, prior.mean, prior.std);

      const MatrixXd eps = MatrixXd::NullaryExpr(cfg.memory_dim, 1,
                                                 [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
      const ad::Var m_t = tape.reparam_sample(q.mean, q.std, eps);
      const StepRecord& step_t = traj.steps[t - 1];
      const VectorXd x_t = Eigen::Map<const VectorXd>(step_t.x.data(), static_cast<Eigen::Index>(step_t.x.size()));
      const EffectVars ev = decode_effect_vars(tape, gen, m_t, x_t);
      const ad::Var ll_t = action_likelihood(tape, gen, ev.tau, step_t.a);

      if (!std::isfinite(tape.scalar(ll_t)) || !std::isfinite(tape.scalar(kl_t)))
        throw NumericalError("elbo: non-finite term at step " + std::to_string(t) +
                             " of trajectory '" + traj.id + "'");

      loglik = loglik.valid() ? tape.add(loglik, ll_t) : ll_t;
      kl = kl.valid() ? tape.add(kl, kl_t) : kl_t;
      m_prev = m_t;
    }
    loglik_total = loglik_total.valid() ? tape.add(loglik_total, loglik) : loglik;
    kl_total = kl_total.valid() ? tape.add(kl_total, kl) : kl;
  }
  const double inv_k = 1.0 / static_cast<double>(mc_samples);
  ElboVars out;
  out.loglik = tape.scale(loglik_total, inv_k);
  out.kl = tape.scale(kl_total, inv_k);
  out.elbo = tape.sub(out.loglik, out.kl);
  return out;
}

}  // namespace iol
