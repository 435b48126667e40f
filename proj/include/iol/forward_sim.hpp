#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "iol/errors.hpp"
#include "iol/io_util.hpp"
#include "iol/rng.hpp"
#include "iol/trajectory.hpp"

namespace iol {

using Eigen::VectorXd;

// True linear environment: y = <x, w_a_true> + noise, contexts standard normal.
struct Environment {
  int d = 0;
  VectorXd w1_true, w0_true;
  double noise_std = 0.5;
};

// Online-learning agent believing linear response surfaces and updating the
// taken arm by gradient descent on the squared residual.
struct AgentState {
  VectorXd w1, w0;
  double lr = 0.05;       // OGD step size
  double alpha = 1.0;     // treatment-rule slope
  double beta = 0.0;      // treatment-rule threshold
};

struct AgentConfig {
  double lr = 0.05;
  double alpha = 1.0;
  double beta = 0.0;
  double prior_std = 12.0;   // scale of the per-trajectory weight prior
  bool shared_init = false; // one weight draw reused for every trajectory
};

// Hidden per-step ground truth emitted alongside the observable corpus.
struct BeliefStep {
  double tau = 0.0;  // believed effect at the arriving context, pre-update
  VectorXd w1, w0;   // believed weights at decision time
};

struct BeliefTrajectory {
  std::string id;
  std::vector<BeliefStep> steps;
};

struct SimResult {
  std::vector<TrajectoryRecord> corpus;
  std::vector<BeliefTrajectory> beliefs;
};

inline Environment make_environment(int d, std::uint64_t seed, double noise_std) {
  if (d < 1) throw ValidationError("environment dimension must be >= 1");
  if (noise_std < 0) throw ValidationError("noise_std must be >= 0");
  Rng rng(mix_seed(seed, 0xe2113a57));
  Environment env;
  env.d = d;
  env.noise_std = noise_std;
  env.w1_true = VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
  env.w0_true = VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
  return env;
}

inline double true_cate(const Environment& env, const VectorXd& x) {
  if (x.size() != env.d) throw ValidationError("true_cate: context dimension mismatch");
  return x.dot(env.w1_true - env.w0_true);
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Returns (action, probability of a=1).
inline std::pair<int, double> agent_act(const AgentState& agent, const VectorXd& x, Rng& rng) {
  const double tau = x.dot(agent.w1 - agent.w0);
  const double p = sigmoid(agent.alpha * (tau - agent.beta));
  const int a = rng.bernoulli(p) ? 1 : 0;
  return {a, p};
}

// OGD on the taken arm only: w_a <- w_a - lr * (y_hat - y) * x.
inline void agent_update(AgentState& agent, const VectorXd& x, int a, double y) {
  VectorXd& w = (a == 1) ? agent.w1 : agent.w0;
  const double y_hat = x.dot(w);
  w -= agent.lr * (y_hat - y) * x;
}

inline SimResult simulate(const Environment& env, const AgentConfig& cfg, int n_traj, int horizon,
                          std::uint64_t seed) {
  if (n_traj < 1 || horizon < 1) throw ValidationError("simulate: n_traj and horizon must be >= 1");
  SimResult out;
  out.corpus.reserve(n_traj);
  out.beliefs.reserve(n_traj);

  VectorXd shared_w1, shared_w0;
  if (cfg.shared_init) {
    Rng r0(mix_seed(seed, 0x51a12ed));
    shared_w1 = VectorXd::NullaryExpr(env.d, [&](Eigen::Index) { return cfg.prior_std * r0.normal(); });
    shared_w0 = VectorXd::NullaryExpr(env.d, [&](Eigen::Index) { return cfg.prior_std * r0.normal(); });
  }

  for (int i = 0; i < n_traj; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    AgentState agent;
    agent.lr = cfg.lr;
    agent.alpha = cfg.alpha;
    agent.beta = cfg.beta;
    if (cfg.shared_init) {
      agent.w1 = shared_w1;
      agent.w0 = shared_w0;
    } else {
      agent.w1 = VectorXd::NullaryExpr(env.d, [&](Eigen::Index) { return cfg.prior_std * rng.normal(); });
      agent.w0 = VectorXd::NullaryExpr(env.d, [&](Eigen::Index) { return cfg.prior_std * rng.normal(); });
    }

    TrajectoryRecord rec;
    rec.id = "t" + std::to_string(i);
    BeliefTrajectory bel;
    bel.id = rec.id;
    for (int t = 0; t < horizon; ++t) {
      const VectorXd x = VectorXd::NullaryExpr(env.d, [&](Eigen::Index) { return rng.normal(); });

      BeliefStep bs;
      bs.tau = x.dot(agent.w1 - agent.w0);
      bs.w1 = agent.w1;
      bs.w0 = agent.w0;
      bel.steps.push_back(std::move(bs));

      const auto [a, p] = agent_act(agent, x, rng);
      const VectorXd& w_true = (a == 1) ? env.w1_true : env.w0_true;
      const double y = x.dot(w_true) + env.noise_std * rng.normal();

      StepRecord s;
      s.x.assign(x.data(), x.data() + x.size());
      s.a = a;
      s.y = y;
      rec.steps.push_back(std::move(s));

      agent_update(agent, x, a, y);
    }
    out.corpus.push_back(std::move(rec));
    out.beliefs.push_back(std::move(bel));
  }
  return out;
}

inline void save_beliefs_jsonl(const std::vector<BeliefTrajectory>& beliefs,
                               const std::string& path) {
  std::string out;
  for (const auto& bel : beliefs) {
    out += "{\"id\": \"" + json_escape(bel.id) + "\", \"steps\": [";
    for (std::size_t t = 0; t < bel.steps.size(); ++t) {
      const BeliefStep& s = bel.steps[t];
      if (t) out += ", ";
      out += "{\"tau_true_belief\": " + format_double(s.tau) + ", \"w1\": [";
      for (Eigen::Index i = 0; i < s.w1.size(); ++i) {
        if (i) out += ", ";
        out += format_double(s.w1[i]);
      }
      out += "], \"w0\": [";
      for (Eigen::Index i = 0; i < s.w0.size(); ++i) {
        if (i) out += ", ";
        out += format_double(s.w0[i]);
      }
      out += "]}";
    }
    out += "]}\n";
  }
  write_text_file(path, out);
}

inline std::vector<BeliefTrajectory> load_beliefs_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open beliefs file: " + path);
  std::vector<BeliefTrajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      BeliefTrajectory bel;
      bel.id = j.at("id").get<std::string>();
      for (const auto& js : j.at("steps")) {
        BeliefStep s;
        s.tau = js.at("tau_true_belief").get<double>();
        const auto w1 = js.at("w1").get<std::vector<double>>();
        const auto w0 = js.at("w0").get<std::vector<double>>();
        s.w1 = Eigen::Map<const VectorXd>(w1.data(), static_cast<Eigen::Index>(w1.size()));
        s.w0 = Eigen::Map<const VectorXd>(w0.data(), static_cast<Eigen::Index>(w0.size()));
        bel.steps.push_back(std::move(s));
      }
      out.push_back(std::move(bel));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("beliefs parse error at " + path + ":" + std::to_string(lineno) +
                            ": " + e.what());
    }
  }
  return out;
}

}  // namespace iol
