#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "greenhouse/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool smoke = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON experiment config; defaults apply per key");
  cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", opts.seed, "override the config seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_flag("--smoke", opts.smoke, "tiny CI-sized run with wall times zeroed");
}

greenhouse::ExperimentConfig resolve_config(const CommonOpts& opts) {
  greenhouse::ExperimentConfig config = greenhouse::load_experiment_config(opts.config_path);
  if (opts.seed_set) config.seed = opts.seed;
  if (opts.smoke) greenhouse::apply_smoke(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lettuce greenhouse climate-control laboratory"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, sim_opts, report_opts;
  std::string policy = "oracle-mpc";

  CLI::App* gen = app.add_subcommand("generate-data",
                                     "run the physics-based controller and write the episode corpus");
  add_common(gen, gen_opts);
  CLI::App* train = app.add_subcommand("train", "train the surrogate grid on the corpus");
  add_common(train, train_opts);
  CLI::App* evaluate = app.add_subcommand("evaluate",
                                          "closed-loop evaluation per model and horizon");
  add_common(evaluate, eval_opts);
  CLI::App* simulate = app.add_subcommand("simulate", "single closed-loop or open-loop run");
  add_common(simulate, sim_opts);
  simulate->add_option("--policy", policy, "zero|constant|oracle-mpc|surrogate-mpc")
      ->capture_default_str();
  CLI::App* report = app.add_subcommand("report", "rebuild report.csv from saved runs");
  add_common(report, report_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      greenhouse::cmd_generate_data(resolve_config(gen_opts), gen_opts.out_dir);
    } else if (train->parsed()) {
      greenhouse::cmd_train(resolve_config(train_opts), train_opts.out_dir);
    } else if (evaluate->parsed()) {
      greenhouse::cmd_evaluate(resolve_config(eval_opts), eval_opts.out_dir);
    } else if (simulate->parsed()) {
      greenhouse::cmd_simulate(resolve_config(sim_opts), sim_opts.out_dir, policy);
    } else if (report->parsed()) {
      greenhouse::cmd_report(resolve_config(report_opts), report_opts.out_dir);
    }
  } catch (const greenhouse::CliError& e) {
    std::cerr << "error: " << e.category << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
