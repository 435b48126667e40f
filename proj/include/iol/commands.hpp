#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "iol/analysis.hpp"
#include "iol/baselines.hpp"
#include "iol/config.hpp"
#include "iol/errors.hpp"
#include "iol/forward_sim.hpp"
#include "iol/trainer.hpp"
#include "iol/trajectory.hpp"

namespace iol {

inline constexpr const char* kToolVersion = "iol 0.1.0";

namespace detail {

inline std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace detail

// Output directories are append-never: a non-empty target requires --force.
inline void prepare_out_dir(const std::string& out_dir, bool force) {
  namespace fs = std::filesystem;
  const fs::path p(out_dir);
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) throw ValidationError("output path is not a directory: " + out_dir);
    if (!fs::is_empty(p) && !force)
      throw ValidationError("output directory is not empty (use --force): " + out_dir);
  } else {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
  }
}

inline void write_manifest(const std::string& out_dir, const std::string& command,
                           const RunConfig& cfg, std::uint64_t seed,
                           const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs,
                           const std::string& started_at) {
  std::string j = "{\"command\": \"" + command + "\", \"tool\": \"" + kToolVersion +
                  "\", \"seed\": " + std::to_string(seed) + ", \"config\": " + config_to_json(cfg) +
                  ", \"inputs\": [";
  for (std::size_t i = 0; i < inputs.size(); ++i)
    j += (i ? ", " : "") + ("\"" + json_escape(inputs[i]) + "\"");
  j += "], \"outputs\": [";
  for (std::size_t i = 0; i < outputs.size(); ++i)
    j += (i ? ", " : "") + ("\"" + json_escape(outputs[i]) + "\"");
  j += "], \"started_at\": \"" + started_at + "\", \"finished_at\": \"" + detail::iso_now() +
       "\"}\n";
  write_text_file(out_dir + "/manifest.json", j);
}

inline std::vector<TrajectoryRecord> load_records(const std::string& path,
                                                  const std::string& format) {
  if (format == "csv") return load_csv(path);
  return load_jsonl(path);
}

// ---------------------------------------------------------------------------
// simulate: corpus.jsonl + beliefs.jsonl
// ---------------------------------------------------------------------------

inline void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, bool force) {
  const std::string started = detail::iso_now();
  prepare_out_dir(out_dir, force);
  Environment env = make_environment(cfg.sim.context_dim, cfg.sim.seed, cfg.sim.noise_std);
  AgentConfig agent;
  agent.lr = cfg.sim.lambda;
  agent.prior_std = cfg.sim.prior_std;
  agent.shared_init = cfg.sim.shared_init;
  SimResult sim = simulate(env, agent, cfg.sim.n_traj, cfg.sim.horizon, cfg.sim.seed);
  save_jsonl(sim.corpus, out_dir + "/corpus.jsonl");
  save_beliefs_jsonl(sim.beliefs, out_dir + "/beliefs.jsonl");
  write_manifest(out_dir, "simulate", cfg, cfg.sim.seed, {},
                 {"corpus.jsonl", "beliefs.jsonl"}, started);
}

// ---------------------------------------------------------------------------
// train: checkpoint.json + report.json
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json standardization_to_json(const StandardizationParams& p) {
  return nlohmann::json{{"x_mean", p.x_mean}, {"x_std", p.x_std},   {"y_mean", p.y_mean},
                        {"y_std", p.y_std},   {"y_binary", p.y_binary}};
}

inline StandardizationParams standardization_from_json(const nlohmann::json& j) {
  StandardizationParams p;
  p.x_mean = j.at("x_mean").get<std::vector<double>>();
  p.x_std = j.at("x_std").get<std::vector<double>>();
  p.y_mean = j.at("y_mean").get<double>();
  p.y_std = j.at("y_std").get<double>();
  p.y_binary = j.at("y_binary").get<bool>();
  return p;
}

inline nlohmann::json model_header(const TrainedModel& model, const StandardizationParams& stdz) {
  return nlohmann::json{{"model",
                         {{"context_dim", model.cfg.context_dim},
                          {"memory_dim", model.cfg.memory_dim},
                          {"hidden", model.cfg.hidden},
                          {"lstm_hidden", model.cfg.lstm_hidden},
                          {"transition_depth", model.cfg.transition_depth},
                          {"head_depth", model.cfg.head_depth},
                          {"posterior_summary",
                           model.cfg.posterior_uses_current_summary ? "current" : "prev"}}},
                        {"epochs_trained", model.epochs_trained},
                        {"standardization", standardization_to_json(stdz)}};
}

}  // namespace detail

struct LoadedModel {
  TrainedModel model;
  StandardizationParams standardization;
};

inline LoadedModel load_trained_model(const std::string& checkpoint_path) {
  nlohmann::json header;
  {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(checkpoint_path));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("checkpoint parse error in " + checkpoint_path + ": " + e.what());
    }
    header = j.value("header", nlohmann::json::object());
  }
  if (!header.contains("model"))
    throw ValidationError("checkpoint has no model header: " + checkpoint_path);
  const auto& m = header.at("model");

  LoadedModel out;
  out.model.cfg.context_dim = m.at("context_dim").get<int>();
  out.model.cfg.memory_dim = m.at("memory_dim").get<int>();
  out.model.cfg.hidden = m.at("hidden").get<int>();
  out.model.cfg.lstm_hidden = m.at("lstm_hidden").get<int>();
  out.model.cfg.transition_depth = m.value("transition_depth", 1);
  out.model.cfg.head_depth = m.value("head_depth", 1);
  out.model.cfg.posterior_uses_current_summary =
      m.value("posterior_summary", "prev") == std::string("current");
  out.model.epochs_trained = header.value("epochs_trained", 0L);
  out.standardization = detail::standardization_from_json(header.at("standardization"));

  Rng scratch(0);
  out.model.gen = make_generative(out.model.cfg, scratch);
  out.model.inf = make_inference(out.model.cfg, scratch);
  ParamRefs params = all_params(out.model.gen, out.model.inf);
  load_checkpoint(checkpoint_path, params);
  return out;
}

inline ModelConfig model_config_from(const RunConfig& cfg) {
  ModelConfig mc;
  mc.memory_dim = cfg.model.memory_dim;
  mc.hidden = cfg.model.hidden;
  mc.lstm_hidden = cfg.model.lstm_hidden;
  mc.transition_depth = cfg.model.transition_depth;
  mc.head_depth = cfg.model.head_depth;
  mc.posterior_uses_current_summary = cfg.model.posterior_summary == "current";
  return mc;
}

inline TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig tc;
  tc.lr = cfg.train.lr;
  tc.epochs = cfg.train.epochs;
  tc.batch_size = cfg.train.batch_size;
  tc.mc_samples = cfg.train.mc_samples;
  tc.seed = cfg.train.seed;
  tc.kl_warmup_epochs = cfg.train.kl_warmup_epochs;
  tc.patience = cfg.train.patience;
  tc.clip_norm = cfg.train.clip_norm;
  tc.lr_decay = cfg.train.lr_decay;
  return tc;
}

inline void cmd_train(const RunConfig& cfg, const std::string& data_path,
                      const std::string& out_dir, bool force,
                      const std::string& resume_checkpoint = "") {
  const std::string started = detail::iso_now();
  prepare_out_dir(out_dir, force);
  std::vector<TrajectoryRecord> records = load_records(data_path, cfg.data.format);
  DatasetSplit split = split_and_standardize(std::move(records), cfg.data.train_frac,
                                             cfg.data.val_frac, cfg.data.test_frac,
                                             cfg.data.split_seed);

  TrainResult result;
  if (!resume_checkpoint.empty()) {
    LoadedModel prev = load_trained_model(resume_checkpoint);
    TrainInit init;
    init.gen = prev.model.gen;
    init.inf = prev.model.inf;
    init.epochs_done = prev.model.epochs_trained;
    // the original standardization stays authoritative for the model
    split.standardization = prev.standardization;
    result = train(split, prev.model.cfg, train_config_from(cfg), &init);
  } else {
    result = train(split, model_config_from(cfg), train_config_from(cfg));
  }

  ParamRefs params = all_params(result.model.gen, result.model.inf);
  save_checkpoint(out_dir + "/checkpoint.json", params,
                  detail::model_header(result.model, split.standardization));
  write_text_file(out_dir + "/report.json", report_to_json(result.report));
  write_manifest(out_dir, "train", cfg, cfg.train.seed, {data_path},
                 {"checkpoint.json", "report.json"}, started);
}

// ---------------------------------------------------------------------------
// evaluate: metrics.csv comparing IOL and requested baselines
// ---------------------------------------------------------------------------

// Per-step action probabilities from the trained model's inferred beliefs.
inline void iol_scores(TrainedModel& model, const std::vector<TrajectoryRecord>& trajs,
                       std::vector<double>& scores, std::vector<int>& labels) {
  for (const auto& traj : trajs) {
    auto steps = infer_beliefs(model.gen, model.inf, model.cfg, traj);
    for (int t = 0; t < traj.length(); ++t) {
      scores.push_back(steps[t].belief.pi);
      labels.push_back(traj.steps[t].a);
    }
  }
}

inline std::vector<std::string> parse_baseline_list(const std::string& csv) {
  static const std::set<std::string> valid = {"bc-linear", "bc-deep", "rcal", "cirl"};
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    name = detail::trim(name);
    if (name.empty()) continue;
    if (!valid.count(name))
      throw ValidationError("unknown baseline '" + name +
                            "'; valid names: bc-linear, bc-deep, rcal, cirl");
    out.push_back(name);
  }
  return out;
}

inline std::string metrics_csv_row(const std::string& method, const MetricReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); };
  return method + "," + num(r.acc) + "," + num(r.acc_std) + "," + num(r.auc) + "," +
         num(r.auc_std) + "," + num(r.aps) + "," + num(r.aps_std) + "," + num(r.nll) + "," +
         num(r.nll_std) + "\n";
}

inline void cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                         const std::string& data_path, const std::string& baselines_csv,
                         const std::string& out_dir, bool force) {
  const std::string started = detail::iso_now();
  const std::vector<std::string> baselines = parse_baseline_list(baselines_csv);
  prepare_out_dir(out_dir, force);

  LoadedModel lm = load_trained_model(checkpoint_path);
  std::vector<TrajectoryRecord> records = load_records(data_path, cfg.data.format);
  DatasetSplit split = iol::split(std::move(records), cfg.data.train_frac, cfg.data.val_frac,
                                  cfg.data.test_frac, cfg.data.split_seed);
  for (auto* part : {&split.train, &split.validation, &split.test})
    apply_standardization(*part, lm.standardization);

  std::string csv = "method,acc,acc_std,auc,auc_std,aps,aps_std,nll,nll_std\n";
  std::string json = "{";

  std::vector<double> scores;
  std::vector<int> labels;
  iol_scores(lm.model, split.test, scores, labels);
  const MetricReport iol_report = aggregate_metrics({evaluate_scores(scores, labels)});
  csv += metrics_csv_row("iol", iol_report);
  json += "\"iol\": " + metric_report_to_json(iol_report);

  if (!baselines.empty()) {
    const StepDataset train_steps = pool_steps(split.train);
    const StepDataset test_steps = pool_steps(split.test);
    std::vector<int> test_labels(test_steps.size());
    for (Eigen::Index j = 0; j < test_steps.size(); ++j)
      test_labels[j] = static_cast<int>(test_steps.a(j));

    for (const std::string& name : baselines) {
      Eigen::RowVectorXd proba;
      if (name == "bc-linear") {
        proba = fit_bc_linear(train_steps).predict_proba(test_steps.X);
      } else if (name == "bc-deep") {
        DeepFitConfig dc;
        dc.seed = cfg.evaluate.seed;
        proba = fit_bc_deep(train_steps, dc).predict_proba(test_steps.X);
      } else if (name == "rcal") {
        DeepFitConfig dc;
        dc.seed = cfg.evaluate.seed;
        proba = fit_rcal(train_steps, 0.01, dc).predict_proba(test_steps.X);
      } else {  // cirl
        proba = fit_cirl_bandit(train_steps).predict_proba(test_steps.X);
      }
      std::vector<double> s(proba.data(), proba.data() + proba.size());
      const MetricReport rep = aggregate_metrics({evaluate_scores(s, test_labels)});
      csv += metrics_csv_row(name, rep);
      json += ", \"" + name + "\": " + metric_report_to_json(rep);
    }
  }
  json += "}\n";
  write_text_file(out_dir + "/metrics.csv", csv);
  write_text_file(out_dir + "/metrics.json", json);
  write_manifest(out_dir, "evaluate", cfg, cfg.evaluate.seed, {checkpoint_path, data_path},
                 {"metrics.csv", "metrics.json"}, started);
}

// ---------------------------------------------------------------------------
// analyze: weights.csv, shifts.csv, beliefs.csv (+ recovery.json)
// ---------------------------------------------------------------------------

inline void cmd_analyze(const RunConfig& cfg, const std::string& checkpoint_path,
                        const std::string& data_path, const std::string& beliefs_path,
                        const std::string& out_dir, bool force) {
  const std::string started = detail::iso_now();
  prepare_out_dir(out_dir, force);
  LoadedModel lm = load_trained_model(checkpoint_path);
  std::vector<TrajectoryRecord> records = load_records(data_path, cfg.data.format);

  std::vector<TrajectoryRecord> subset;
  if (cfg.analyze.split == "all") {
    subset = std::move(records);
  } else {
    DatasetSplit split = iol::split(std::move(records), cfg.data.train_frac, cfg.data.val_frac,
                                    cfg.data.test_frac, cfg.data.split_seed);
    if (cfg.analyze.split == "train")
      subset = std::move(split.train);
    else if (cfg.analyze.split == "validation")
      subset = std::move(split.validation);
    else
      subset = std::move(split.test);
  }
  apply_standardization(subset, lm.standardization);

  export_weights_csv(weight_timelines(lm.model, subset, cfg.analyze.n_bins),
                     out_dir + "/weights.csv");
  const ShiftMode mode = cfg.analyze.shift_mode == "panel" ? ShiftMode::ReferencePanel
                                                           : ShiftMode::ObservedContext;
  export_shifts_csv(policy_shift_series(lm.model, subset, mode), out_dir + "/shifts.csv");
  export_beliefs_csv(lm.model, subset, out_dir + "/beliefs.csv");

  std::vector<std::string> outputs = {"weights.csv", "shifts.csv", "beliefs.csv"};
  std::vector<std::string> inputs = {checkpoint_path, data_path};
  if (!beliefs_path.empty()) {
    const std::vector<BeliefTrajectory> beliefs = load_beliefs_jsonl(beliefs_path);
    const double score = belief_recovery_score(lm.model, subset, beliefs);
    long pairs = 0;
    for (const auto& t : subset) pairs += t.length();
    write_text_file(out_dir + "/recovery.json",
                    "{\"belief_recovery_score\": " + format_double(score) +
                        ", \"steps\": " + std::to_string(pairs) + ", \"split\": \"" +
                        cfg.analyze.split + "\"}\n");
    outputs.push_back("recovery.json");
    inputs.push_back(beliefs_path);
  }
  write_manifest(out_dir, "analyze", cfg, 0, inputs, outputs, started);
}

}  // namespace iol
