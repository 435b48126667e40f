#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "iol/errors.hpp"
#include "iol/io_util.hpp"
#include "iol/param.hpp"
#include "iol/rng.hpp"
#include "iol/tape.hpp"

namespace iol {

// ---------------------------------------------------------------------------
// Feed-forward network: affine layers, tanh on hidden layers, linear output.
// ---------------------------------------------------------------------------

struct Dense {
  ParamTensor W, b;
};

struct Mlp {
  std::vector<Dense> layers;

  int in_dim() const { return static_cast<int>(layers.front().W.value.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().W.value.rows()); }

  ParamRefs params() {
    ParamRefs out;
    for (auto& l : layers) {
      out.push_back(&l.W);
      out.push_back(&l.b);
    }
    return out;
  }
};

// Glorot-style init, scaled for tanh hidden units.
inline MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double s = std::sqrt(2.0 / static_cast<double>(rows + cols));
  return MatrixXd::NullaryExpr(rows, cols, [&](Eigen::Index, Eigen::Index) { return s * rng.normal(); });
}

inline Mlp make_mlp(const std::string& name, const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw ValidationError("make_mlp: need at least input and output dims");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Dense d;
    d.W = ParamTensor(name + ".W" + std::to_string(i), glorot(dims[i + 1], dims[i], rng));
    d.b = ParamTensor(name + ".b" + std::to_string(i), MatrixXd::Zero(dims[i + 1], 1));
    mlp.layers.push_back(std::move(d));
  }
  return mlp;
}

inline ad::Var mlp_forward(ad::Tape& tape, Mlp& mlp, ad::Var input) {
  ad::Var h = input;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = tape.affine(mlp.layers[i].W, mlp.layers[i].b, h);
    if (i + 1 < mlp.layers.size()) h = tape.vtanh(h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Gated recurrent cell (LSTM), fused weights in gate order [i, f, g, o].
// ---------------------------------------------------------------------------

struct LstmCell {
  ParamTensor W;  // 4H x (input + H)
  ParamTensor b;  // 4H x 1
  int input = 0, hidden = 0;

  ParamRefs params() { return {&W, &b}; }
};

inline LstmCell make_lstm(const std::string& name, int input, int hidden, Rng& rng) {
  LstmCell cell;
  cell.input = input;
  cell.hidden = hidden;
  cell.W = ParamTensor(name + ".W", glorot(4 * hidden, input + hidden, rng));
  MatrixXd b = MatrixXd::Zero(4 * hidden, 1);
  b.block(hidden, 0, hidden, 1).setOnes();  // forget gate bias starts open
  cell.b = ParamTensor(name + ".b", std::move(b));
  return cell;
}

struct LstmState {
  ad::Var h, c;
};

inline LstmState lstm_initial_state(ad::Tape& tape, const LstmCell& cell) {
  return {tape.constant(MatrixXd::Zero(cell.hidden, 1)),
          tape.constant(MatrixXd::Zero(cell.hidden, 1))};
}

inline LstmState recurrent_step(ad::Tape& tape, LstmCell& cell, LstmState state, ad::Var input) {
  const int H = cell.hidden;
  ad::Var z = tape.concat({input, state.h});
  ad::Var gates = tape.affine(cell.W, cell.b, z);
  ad::Var i = tape.vsigmoid(tape.segment(gates, 0, H));
  ad::Var f = tape.vsigmoid(tape.segment(gates, H, H));
  ad::Var g = tape.vtanh(tape.segment(gates, 2 * H, H));
  ad::Var o = tape.vsigmoid(tape.segment(gates, 3 * H, H));
  ad::Var c = tape.add(tape.hadamard(f, state.c), tape.hadamard(i, g));
  ad::Var h = tape.hadamard(o, tape.vtanh(c));
  return {h, c};
}

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<MatrixXd> m, v;
  long t = 0;

  void init(const ParamRefs& params) {
    m.clear();
    v.clear();
    for (const ParamTensor* p : params) {
      m.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
      v.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
    t = 0;
  }
};

inline void adam_step(const ParamRefs& params, AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  if (state.m.size() != params.size()) throw ValidationError("adam_step: state size mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = *params[i];
    if (!p.grad.allFinite())
      throw NumericalError("non-finite gradient for parameter '" + p.name + "'");
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * p.grad;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    const MatrixXd mhat = state.m[i] / bc1;
    const MatrixXd vhat = state.v[i] / bc2;
    p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker.
// ---------------------------------------------------------------------------

// `loss` recomputes the objective and repopulates grads on every call (zeroing
// them first). Returns the worst relative error between the reverse-mode
// gradient and central differences over all coordinates of `params`.
inline double grad_check(const std::function<double()>& loss, const ParamRefs& params, double h) {
  loss();
  std::vector<MatrixXd> analytic;
  analytic.reserve(params.size());
  for (const ParamTensor* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamTensor& p = *params[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + h;
      const double f1 = loss();
      p.value.data()[i] = orig - h;
      const double f2 = loss();
      p.value.data()[i] = orig;
      const double numeric = (f1 - f2) / (2.0 * h);
      const double a = analytic[k].data()[i];
      const double rel = std::abs(numeric - a) / std::max({std::abs(numeric), std::abs(a), 1e-8});
      if (rel > worst) worst = rel;
    }
  }
  loss();  // leave grads consistent with unperturbed params
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoint manifest: tensor name, shape, row-major values at 17 significant
// digits; round-trips bit-exactly.
// ---------------------------------------------------------------------------

inline std::string checkpoint_to_json(const ParamRefs& params, const nlohmann::json& header) {
  std::string out = "{\"format\": \"iol-checkpoint\", \"version\": 1";
  if (!header.empty()) out += ", \"header\": " + header.dump();
  out += ", \"tensors\": [";
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamTensor& p = *params[k];
    if (k) out += ", ";
    out += "{\"name\": \"" + json_escape(p.name) + "\", \"shape\": [" +
           std::to_string(p.value.rows()) + ", " + std::to_string(p.value.cols()) +
           "], \"values\": [";
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        if (r || c) out += ", ";
        out += format_double(p.value(r, c));
      }
    out += "]}";
  }
  out += "]}\n";
  return out;
}

inline void save_checkpoint(const std::string& path, const ParamRefs& params,
                            const nlohmann::json& header) {
  write_text_file(path, checkpoint_to_json(params, header));
}

// Loads values into the given tensors (matched by name) and returns the header.
inline nlohmann::json load_checkpoint(const std::string& path, const ParamRefs& params) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "iol-checkpoint")
    throw ValidationError("not an iol checkpoint: " + path);
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
  for (ParamTensor* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw ValidationError("checkpoint " + path + " is missing tensor '" + p->name + "'");
    const auto& t = *it->second;
    const auto shape = t.at("shape").get<std::vector<long>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols())
      throw ValidationError("checkpoint tensor '" + p->name + "' has wrong shape");
    const auto vals = t.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(vals.size()) != p->value.size())
      throw ValidationError("checkpoint tensor '" + p->name + "' has wrong value count");
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) p->value(r, c) = vals[k++];
  }
  return j.value("header", nlohmann::json::object());
}

}  // namespace iol
