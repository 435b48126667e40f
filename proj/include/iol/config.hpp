#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "iol/errors.hpp"
#include "iol/io_util.hpp"

namespace iol {

struct SimSection {
  int n_traj = 2000;
  int horizon = 50;
  int context_dim = 5;
  double lambda = 0.05;
  double noise_std = 0.5;
  double prior_std = 12.0;
  bool shared_init = false;
  std::uint64_t seed = 42;
};

struct DataSection {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t split_seed = 13;
  std::string format = "jsonl";  // or "csv"
};

struct ModelSection {
  int memory_dim = 16;
  int hidden = 64;
  int lstm_hidden = 64;
  int transition_depth = 2;
  int head_depth = 2;
  std::string posterior_summary = "prev";  // or "current"
};

struct TrainSection {
  double lr = 1e-3;
  int epochs = 60;
  int batch_size = 16;
  int mc_samples = 1;
  std::uint64_t seed = 1;
  int kl_warmup_epochs = 150;
  int patience = 10;
  double clip_norm = 5.0;
  double lr_decay = 0.99;
};

struct EvaluateSection {
  std::string baselines = "bc-linear,bc-deep,rcal,cirl";
  std::uint64_t seed = 7;
};

struct AnalyzeSection {
  int n_bins = 5;
  std::string shift_mode = "observed";  // or "panel"
  std::string split = "all";            // all | train | validation | test
};

struct RunConfig {
  SimSection sim;
  DataSection data;
  ModelSection model;
  TrainSection train;
  EvaluateSection evaluate;
  AnalyzeSection analyze;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigBinder {
  std::map<std::string, std::function<void(const std::string&)>> setters;

  template <typename T>
  void bind(const std::string& key, T& field) {
    setters[key] = [&field, key](const std::string& raw) {
      std::istringstream ss(raw);
      if constexpr (std::is_same_v<T, std::string>) {
        field = raw;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (raw == "true" || raw == "1")
          field = true;
        else if (raw == "false" || raw == "0")
          field = false;
        else
          throw ValidationError("config key '" + key + "' expects true/false, got '" + raw + "'");
      } else {
        T v{};
        ss >> v;
        if (ss.fail() || !ss.eof())
          throw ValidationError("config key '" + key + "' has invalid value '" + raw + "'");
        field = v;
      }
    };
  }

  void set(const std::string& key, const std::string& value) const {
    auto it = setters.find(key);
    if (it == setters.end()) throw ValidationError("unknown config key '" + key + "'");
    it->second(value);
  }

  bool has(const std::string& key) const { return setters.count(key) > 0; }
};

inline ConfigBinder make_binder(RunConfig& c) {
  ConfigBinder b;
  b.bind("sim.n_traj", c.sim.n_traj);
  b.bind("sim.horizon", c.sim.horizon);
  b.bind("sim.context_dim", c.sim.context_dim);
  b.bind("sim.lambda", c.sim.lambda);
  b.bind("sim.noise_std", c.sim.noise_std);
  b.bind("sim.prior_std", c.sim.prior_std);
  b.bind("sim.shared_init", c.sim.shared_init);
  b.bind("sim.seed", c.sim.seed);
  b.bind("data.train_frac", c.data.train_frac);
  b.bind("data.val_frac", c.data.val_frac);
  b.bind("data.test_frac", c.data.test_frac);
  b.bind("data.split_seed", c.data.split_seed);
  b.bind("data.format", c.data.format);
  b.bind("model.memory_dim", c.model.memory_dim);
  b.bind("model.hidden", c.model.hidden);
  b.bind("model.lstm_hidden", c.model.lstm_hidden);
  b.bind("model.transition_depth", c.model.transition_depth);
  b.bind("model.head_depth", c.model.head_depth);
  b.bind("model.posterior_summary", c.model.posterior_summary);
  b.bind("train.lr", c.train.lr);
  b.bind("train.epochs", c.train.epochs);
  b.bind("train.batch_size", c.train.batch_size);
  b.bind("train.mc_samples", c.train.mc_samples);
  b.bind("train.seed", c.train.seed);
  b.bind("train.kl_warmup_epochs", c.train.kl_warmup_epochs);
  b.bind("train.patience", c.train.patience);
  b.bind("train.clip_norm", c.train.clip_norm);
  b.bind("train.lr_decay", c.train.lr_decay);
  b.bind("evaluate.baselines", c.evaluate.baselines);
  b.bind("evaluate.seed", c.evaluate.seed);
  b.bind("analyze.n_bins", c.analyze.n_bins);
  b.bind("analyze.shift_mode", c.analyze.shift_mode);
  b.bind("analyze.split", c.analyze.split);
  return b;
}

}  // namespace detail

inline void validate_config(const RunConfig& c);

// INI-style config: [section] headers with key = value lines, or fully
// qualified section.key = value lines; '#' and ';' start comments.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  detail::ConfigBinder binder = detail::make_binder(cfg);
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError("config line " + std::to_string(lineno) + ": malformed section");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    binder.set(key, value);
  }
  validate_config(cfg);
  return cfg;
}

inline void validate_config(const RunConfig& c) {
  if (c.sim.n_traj < 1) throw ValidationError("sim.n_traj must be >= 1");
  if (c.sim.horizon < 1) throw ValidationError("sim.horizon must be >= 1");
  if (c.sim.context_dim < 1) throw ValidationError("sim.context_dim must be >= 1");
  if (c.sim.noise_std < 0) throw ValidationError("sim.noise_std must be >= 0");
  if (c.sim.prior_std <= 0) throw ValidationError("sim.prior_std must be > 0");
  if (c.data.format != "jsonl" && c.data.format != "csv")
    throw ValidationError("data.format must be jsonl or csv");
  if (c.model.memory_dim < 1) throw ValidationError("model.memory_dim must be >= 1");
  if (c.model.hidden < 1) throw ValidationError("model.hidden must be >= 1");
  if (c.model.lstm_hidden < 1) throw ValidationError("model.lstm_hidden must be >= 1");
  if (c.model.transition_depth < 1) throw ValidationError("model.transition_depth must be >= 1");
  if (c.model.head_depth < 1) throw ValidationError("model.head_depth must be >= 1");
  if (c.model.posterior_summary != "prev" && c.model.posterior_summary != "current")
    throw ValidationError("model.posterior_summary must be prev or current");
  if (c.analyze.n_bins < 1) throw ValidationError("analyze.n_bins must be >= 1");
  if (c.analyze.shift_mode != "observed" && c.analyze.shift_mode != "panel")
    throw ValidationError("analyze.shift_mode must be observed or panel");
  if (c.analyze.split != "all" && c.analyze.split != "train" && c.analyze.split != "validation" &&
      c.analyze.split != "test")
    throw ValidationError("analyze.split must be all, train, validation, or test");
}

inline RunConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

// Deterministic snapshot of the effective configuration.
inline std::string config_to_json(const RunConfig& c) {
  std::string out = "{";
  out += "\"sim\": {\"n_traj\": " + std::to_string(c.sim.n_traj) +
         ", \"horizon\": " + std::to_string(c.sim.horizon) +
         ", \"context_dim\": " + std::to_string(c.sim.context_dim) +
         ", \"lambda\": " + format_double(c.sim.lambda) +
         ", \"noise_std\": " + format_double(c.sim.noise_std) +
         ", \"prior_std\": " + format_double(c.sim.prior_std) +
         ", \"shared_init\": " + (c.sim.shared_init ? std::string("true") : std::string("false")) +
         ", \"seed\": " + std::to_string(c.sim.seed) + "}";
  out += ", \"data\": {\"train_frac\": " + format_double(c.data.train_frac) +
         ", \"val_frac\": " + format_double(c.data.val_frac) +
         ", \"test_frac\": " + format_double(c.data.test_frac) +
         ", \"split_seed\": " + std::to_string(c.data.split_seed) + ", \"format\": \"" +
         c.data.format + "\"}";
  out += ", \"model\": {\"memory_dim\": " + std::to_string(c.model.memory_dim) +
         ", \"hidden\": " + std::to_string(c.model.hidden) +
         ", \"lstm_hidden\": " + std::to_string(c.model.lstm_hidden) +
         ", \"transition_depth\": " + std::to_string(c.model.transition_depth) +
         ", \"head_depth\": " + std::to_string(c.model.head_depth) +
         ", \"posterior_summary\": \"" + c.model.posterior_summary + "\"}";
  out += ", \"train\": {\"lr\": " + format_double(c.train.lr) +
         ", \"epochs\": " + std::to_string(c.train.epochs) +
         ", \"batch_size\": " + std::to_string(c.train.batch_size) +
         ", \"mc_samples\": " + std::to_string(c.train.mc_samples) +
         ", \"seed\": " + std::to_string(c.train.seed) +
         ", \"kl_warmup_epochs\": " + std::to_string(c.train.kl_warmup_epochs) +
         ", \"patience\": " + std::to_string(c.train.patience) +
         ", \"clip_norm\": " + format_double(c.train.clip_norm) +
         ", \"lr_decay\": " + format_double(c.train.lr_decay) + "}";
  out += ", \"evaluate\": {\"baselines\": \"" + c.evaluate.baselines +
         "\", \"seed\": " + std::to_string(c.evaluate.seed) + "}";
  out += ", \"analyze\": {\"n_bins\": " + std::to_string(c.analyze.n_bins) +
         ", \"shift_mode\": \"" + c.analyze.shift_mode + "\", \"split\": \"" + c.analyze.split +
         "\"}";
  out += "}";
  return out;
}

}  // namespace iol
