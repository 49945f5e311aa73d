#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greenhouse/mpc.hpp"
#include "greenhouse/seqnet.hpp"
#include "greenhouse/weather.hpp"

namespace greenhouse {

// CLI-facing error with a one-line machine-parsable category.
struct CliError : std::runtime_error {
  CliError(std::string category_in, const std::string& message)
      : std::runtime_error(message), category(std::move(category_in)) {}
  std::string category;
};

struct ScenarioConfig {
  int train_episodes = 6;
  int train_days = 40;
  int eval_days = 10;
  WeatherProfile profile;
  State x0 = {0.0035, 0.001, 15.0, 0.008};
};

struct TrainingGrid {
  std::vector<CellKind> kinds = {CellKind::kLstm, CellKind::kGru};
  std::vector<int> windows = {6, 12, 18, 24};
  std::vector<int> batches = {8, 16, 32};
  int epochs = 15;
  double learning_rate = 3e-5;
  int sched_step = 5;
  double sched_gamma = 0.5;
  double dropout = 0.2;
  double split_ratio = 0.8;
  int threads = 0;  // 0 defers to hardware concurrency
};

struct EvaluationConfig {
  std::vector<CellKind> kinds = {CellKind::kLstm, CellKind::kGru};
  std::vector<int> horizons = {6, 12, 18, 24, 30};
  bool include_oracle = true;
  int oracle_horizon = 24;
  SolverSettings solver{.iterations = 32, .restarts = 1, .min_step = 0.0};
  int threads = 0;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  ScenarioConfig scenario;
  MpcConfig datagen_mpc;  // oracle controller that generates the corpus
  TrainingGrid training;
  EvaluationConfig evaluation;
  bool smoke = false;  // CI mode: tiny sizes, wall times zeroed in outputs

  ExperimentConfig();
};

// Parse the JSON config file; every key is optional and overlays the
// defaults. Empty path keeps the defaults.
ExperimentConfig load_experiment_config(const std::string& path);
// Shrink sizes for CI and zero recorded wall times.
void apply_smoke(ExperimentConfig& config);

std::string config_json(const ExperimentConfig& config);

// Deterministic per-episode weather scenarios for the training corpus.
WeatherProfile scenario_profile(const ExperimentConfig& config, int episode_index);
WeatherProfile eval_profile(const ExperimentConfig& config);

// Subcommands. All artifact paths land under out_dir; each returns the list
// of files written and updates out_dir/manifest.json.
std::vector<std::string> cmd_generate_data(const ExperimentConfig& config,
                                           const std::string& out_dir);
std::vector<std::string> cmd_train(const ExperimentConfig& config, const std::string& out_dir);
std::vector<std::string> cmd_evaluate(const ExperimentConfig& config, const std::string& out_dir);
std::vector<std::string> cmd_simulate(const ExperimentConfig& config, const std::string& out_dir,
                                      const std::string& policy);
std::vector<std::string> cmd_report(const ExperimentConfig& config, const std::string& out_dir);

// Paths used by the commands (relative to out_dir).
std::string train_episode_path(const std::string& out_dir, int index);
std::string checkpoint_path(const std::string& out_dir, CellKind kind, int window, int batch);
std::string best_checkpoint_path(const std::string& out_dir, CellKind kind);

}  // namespace greenhouse
