#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "iol/commands.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string data_path;
  std::string checkpoint_path;
  std::string beliefs_path;
  std::string baselines;
  std::string format;
  long long seed = -1;
  int n_bins = -1;
  bool force = false;
};

iol::RunConfig effective_config(const CommonOpts& opts, const std::string& command) {
  iol::RunConfig cfg =
      opts.config_path.empty() ? iol::RunConfig{} : iol::parse_config_file(opts.config_path);
  // flag > file > default
  if (opts.seed >= 0) {
    if (command == "simulate")
      cfg.sim.seed = static_cast<std::uint64_t>(opts.seed);
    else if (command == "train")
      cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
    else
      cfg.evaluate.seed = static_cast<std::uint64_t>(opts.seed);
  }
  if (!opts.format.empty()) cfg.data.format = opts.format;
  if (opts.n_bins > 0) cfg.analyze.n_bins = opts.n_bins;
  iol::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse online learning: recover evolving perceived treatment effects "
               "and non-stationary policies from logged trajectories"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--config", opts.config_path, "config file (ini-style sections)");
    sub->add_option("--out", opts.out_dir, "output directory")->required();
    if (needs_data) sub->add_option("--data", opts.data_path, "trajectory file")->required();
    sub->add_option("--seed", opts.seed, "override the command's seed");
    sub->add_option("--format", opts.format, "data format: jsonl or csv");
    sub->add_flag("--force", opts.force, "allow writing into a non-empty directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic corpus with belief logs");
  add_common(sim, false);

  CLI::App* train = app.add_subcommand("train", "fit the model on logged trajectories");
  add_common(train, true);
  train->add_option("--checkpoint", opts.checkpoint_path, "resume from this checkpoint");

  CLI::App* evaluate = app.add_subcommand("evaluate", "action-matching metrics vs baselines");
  add_common(evaluate, true);
  evaluate->add_option("--checkpoint", opts.checkpoint_path, "trained model checkpoint")
      ->required();
  evaluate->add_option("--baselines", opts.baselines,
                       "comma-separated: bc-linear,bc-deep,rcal,cirl (empty for IOL only)");

  CLI::App* analyze = app.add_subcommand("analyze", "weight timelines, policy shifts, beliefs");
  add_common(analyze, true);
  analyze->add_option("--checkpoint", opts.checkpoint_path, "trained model checkpoint")
      ->required();
  analyze->add_option("--beliefs", opts.beliefs_path, "simulator belief log for recovery scoring");
  analyze->add_option("--n-bins", opts.n_bins, "number of time bins for weights.csv");

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const iol::RunConfig cfg = effective_config(opts, command);
    if (command == "simulate") {
      iol::cmd_simulate(cfg, opts.out_dir, opts.force);
    } else if (command == "train") {
      iol::cmd_train(cfg, opts.data_path, opts.out_dir, opts.force, opts.checkpoint_path);
    } else if (command == "evaluate") {
      const std::string baselines =
          evaluate->count("--baselines") ? opts.baselines : cfg.evaluate.baselines;
      iol::cmd_evaluate(cfg, opts.checkpoint_path, opts.data_path, baselines, opts.out_dir,
                        opts.force);
    } else {
      iol::cmd_analyze(cfg, opts.checkpoint_path, opts.data_path, opts.beliefs_path, opts.out_dir,
                       opts.force);
    }
  } catch (const iol::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const iol::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 2;
  } catch (const iol::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
