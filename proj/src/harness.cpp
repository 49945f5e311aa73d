#include "greenhouse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "greenhouse/metrics.hpp"
#include "greenhouse/svg.hpp"
#include "greenhouse/textio.hpp"

namespace greenhouse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string kind_tag(CellKind kind) {
  return kind == CellKind::kLstm ? "LSTM" : "GRU";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError("io", dir + ": cannot create directory");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Merge this command's artifact list into out_dir/manifest.json.
void update_manifest(const ExperimentConfig& config, const std::string& out_dir,
                     const std::string& command, const std::vector<std::string>& artifacts) {
  const std::string path = out_dir + "/manifest.json";
  json manifest;
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      in >> manifest;
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  manifest["format"] = "greenhouse-lab/1";
  manifest["config_hash"] = fnv1a(config_json(config));
  json entry;
  entry["artifacts"] = artifacts;
  if (!config.smoke) entry["completed_at"] = timestamp_utc();
  manifest[command] = entry;
  std::ofstream out(path, std::ios::binary);
  out << manifest.dump(2) << "\n";
  for (const std::string& artifact : artifacts) {
    if (!fs::exists(artifact)) {
      throw CliError("internal", artifact + ": listed artifact missing after completion");
    }
  }
}

int resolve_threads(int configured, std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 2;
  int n = configured > 0 ? configured : static_cast<int>(hw);
  return std::max(1, std::min<int>(n, static_cast<int>(jobs)));
}

// Run fn(i) for i in [0, jobs) on a small pool; exceptions surface here.
void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (int t = 0; t < threads; ++t) {
    workers.push_back(std::async(std::launch::async, [&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs) return;
        fn(i);
      }
    }));
  }
  for (auto& w : workers) w.get();
}

std::vector<EpisodeLog> load_training_episodes(const ExperimentConfig& config,
                                               const std::string& out_dir) {
  std::vector<EpisodeLog> episodes;
  for (int e = 0; e < config.scenario.train_episodes; ++e) {
    const std::string path = train_episode_path(out_dir, e);
    if (!fs::exists(path)) {
      throw CliError("data", path + ": missing training episode; run generate-data first");
    }
    episodes.push_back(load_episode_csv(path));
  }
  return episodes;
}

struct GridCell {
  CellKind kind;
  int window;
  int batch;
};

std::vector<GridCell> grid_cells(const TrainingGrid& grid) {
  std::vector<GridCell> cells;
  for (CellKind kind : grid.kinds) {
    for (int window : grid.windows) {
      for (int batch : grid.batches) cells.push_back({kind, window, batch});
    }
  }
  return cells;
}

std::string metrics_path(const std::string& out_dir) { return out_dir + "/training_metrics.csv"; }

struct MetricsRow {
  std::string model;
  int batch = 0;
  int window = 0;
  double mse = 0.0;
  double rmse = 0.0;
};

std::vector<MetricsRow> load_training_metrics(const std::string& out_dir) {
  const std::string path = metrics_path(out_dir);
  if (!fs::exists(path)) {
    throw CliError("data", path + ": missing training metrics; run train first");
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const std::string ctx = path + ":" + format_int(static_cast<std::int64_t>(line_no));
    if (f.size() != 5) throw CliError("data", ctx + ": expected 5 columns");
    MetricsRow row;
    row.model = std::string(f[0]);
    row.batch = static_cast<int>(parse_int(f[1], ctx));
    row.window = static_cast<int>(parse_int(f[2], ctx));
    row.mse = parse_double(f[3], ctx);
    row.rmse = parse_double(f[4], ctx);
    rows.push_back(row);
  }
  return rows;
}

ControlInput zero_policy(std::int64_t, const State&, const Output&, const Disturbance&) {
  return ControlInput{};
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // Corpus generation runs warm-started closed loops; a trimmed budget per
  // solve keeps the full pipeline at desk scale.
  datagen_mpc.solver.iterations = 60;
  datagen_mpc.solver.restarts = 1;
  datagen_mpc.solver.min_step = 5e-4;
  // Mild seeded actuation dither decorrelates inputs from state so the
  // surrogates can identify the input response.
  datagen_mpc.explore_dither = 0.15;
}

WeatherProfile scenario_profile(const ExperimentConfig& config, int episode_index) {
  WeatherProfile p = config.scenario.profile;
  Rng rng(splitmix64(config.seed ^ (0xA11CE5ULL + static_cast<std::uint64_t>(episode_index))));
  // Seasonal variety across episodes, same operating envelope.
  p.rad_peak *= 1.0 + 0.2 * rng.jitter();
  p.temp_mean += 3.0 * rng.jitter();
  p.temp_amp *= 1.0 + 0.15 * rng.jitter();
  p.rh_mean = std::min(0.9, std::max(0.5, p.rh_mean + 0.08 * rng.jitter()));
  p.seed = splitmix64(config.seed ^ (0xB0B5EEDULL + static_cast<std::uint64_t>(episode_index)));
  return p;
}

WeatherProfile eval_profile(const ExperimentConfig& config) {
  WeatherProfile p = config.scenario.profile;
  p.seed = splitmix64(config.seed ^ 0xE7A1DA7AULL);
  return p;
}

namespace {

void overlay_solver(const json& j, SolverSettings& s) {
  if (j.contains("iterations")) s.iterations = j["iterations"].get<int>();
  if (j.contains("restarts")) s.restarts = j["restarts"].get<int>();
  if (j.contains("momentum")) s.momentum = j["momentum"].get<double>();
  if (j.contains("step_size")) s.step_size = j["step_size"].get<double>();
  if (j.contains("min_step")) s.min_step = j["min_step"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
}

void overlay_profile(const json& j, WeatherProfile& p) {
  if (j.contains("rad_peak")) p.rad_peak = j["rad_peak"].get<double>();
  if (j.contains("day_start_h")) p.day_start_h = j["day_start_h"].get<double>();
  if (j.contains("day_length_h")) p.day_length_h = j["day_length_h"].get<double>();
  if (j.contains("temp_mean")) p.temp_mean = j["temp_mean"].get<double>();
  if (j.contains("temp_amp")) p.temp_amp = j["temp_amp"].get<double>();
  if (j.contains("temp_peak_h")) p.temp_peak_h = j["temp_peak_h"].get<double>();
  if (j.contains("co2_mean")) p.co2_mean = j["co2_mean"].get<double>();
  if (j.contains("rh_mean")) p.rh_mean = j["rh_mean"].get<double>();
  if (j.contains("noise")) p.noise = j["noise"].get<double>();
}

std::vector<CellKind> parse_kinds(const json& j) {
  std::vector<CellKind> kinds;
  for (const auto& item : j) kinds.push_back(cell_kind_from_name(item.get<std::string>()));
  if (kinds.empty()) throw CliError("config", "kinds list must not be empty");
  return kinds;
}

void overlay_mpc(const json& j, MpcConfig& c) {
  if (j.contains("horizon")) c.horizon = j["horizon"].get<int>();
  if (j.contains("yield_weight")) c.yield_weight = j["yield_weight"].get<double>();
  if (j.contains("penalty_co2")) c.penalty_co2 = j["penalty_co2"].get<double>();
  if (j.contains("penalty_temp")) c.penalty_temp = j["penalty_temp"].get<double>();
  if (j.contains("penalty_humidity")) c.penalty_humidity = j["penalty_humidity"].get<double>();
  if (j.contains("penalty_rate")) c.penalty_rate = j["penalty_rate"].get<double>();
  if (j.contains("explore_dither")) c.explore_dither = j["explore_dither"].get<double>();
  if (j.contains("solver")) overlay_solver(j["solver"], c.solver);
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  ExperimentConfig config;
  if (path.empty()) return config;
  std::ifstream in(path);
  if (!in) throw CliError("config", path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CliError("config", path + ": " + e.what());
  }
  try {
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("scenario")) {
      const json& s = j["scenario"];
      if (s.contains("train_episodes")) config.scenario.train_episodes = s["train_episodes"].get<int>();
      if (s.contains("train_days")) config.scenario.train_days = s["train_days"].get<int>();
      if (s.contains("eval_days")) config.scenario.eval_days = s["eval_days"].get<int>();
      if (s.contains("profile")) overlay_profile(s["profile"], config.scenario.profile);
      if (s.contains("x0")) {
        const auto v = s["x0"].get<std::vector<double>>();
        if (v.size() != 4) throw CliError("config", "scenario.x0 needs 4 entries");
        config.scenario.x0 = State::from_array({v[0], v[1], v[2], v[3]});
      }
    }
    if (j.contains("datagen")) overlay_mpc(j["datagen"], config.datagen_mpc);
    if (j.contains("training")) {
      const json& t = j["training"];
      if (t.contains("kinds")) config.training.kinds = parse_kinds(t["kinds"]);
      if (t.contains("windows")) config.training.windows = t["windows"].get<std::vector<int>>();
      if (t.contains("batches")) config.training.batches = t["batches"].get<std::vector<int>>();
      if (t.contains("epochs")) config.training.epochs = t["epochs"].get<int>();
      if (t.contains("learning_rate")) config.training.learning_rate = t["learning_rate"].get<double>();
      if (t.contains("sched_step")) config.training.sched_step = t["sched_step"].get<int>();
      if (t.contains("sched_gamma")) config.training.sched_gamma = t["sched_gamma"].get<double>();
      if (t.contains("dropout")) config.training.dropout = t["dropout"].get<double>();
      if (t.contains("split_ratio")) config.training.split_ratio = t["split_ratio"].get<double>();
      if (t.contains("threads")) config.training.threads = t["threads"].get<int>();
      if (config.training.windows.empty() || config.training.batches.empty()) {
        throw CliError("config", "training grid must not be empty");
      }
    }
    if (j.contains("evaluation")) {
      const json& e = j["evaluation"];
      if (e.contains("kinds")) config.evaluation.kinds = parse_kinds(e["kinds"]);
      if (e.contains("horizons")) config.evaluation.horizons = e["horizons"].get<std::vector<int>>();
      if (e.contains("include_oracle")) config.evaluation.include_oracle = e["include_oracle"].get<bool>();
      if (e.contains("oracle_horizon")) config.evaluation.oracle_horizon = e["oracle_horizon"].get<int>();
      if (e.contains("solver")) overlay_solver(e["solver"], config.evaluation.solver);
      if (e.contains("threads")) config.evaluation.threads = e["threads"].get<int>();
      if (config.evaluation.horizons.empty()) {
        throw CliError("config", "evaluation.horizons must not be empty");
      }
    }
  } catch (const json::exception& e) {
    throw CliError("config", path + ": " + e.what());
  }
  return config;
}

void apply_smoke(ExperimentConfig& config) {
  config.smoke = true;
  config.scenario.train_episodes = 2;
  config.scenario.train_days = 2;
  config.scenario.eval_days = 1;
  config.training.windows = {6};
  config.training.batches = {32};
  config.training.epochs = 2;
  config.evaluation.horizons = {6};
  config.evaluation.solver.iterations = 16;
  config.datagen_mpc.horizon = 6;
  config.datagen_mpc.solver.iterations = 30;
}

std::string config_json(const ExperimentConfig& config) {
  json j;
  j["seed"] = config.seed;
  j["smoke"] = config.smoke;
  j["scenario"] = {{"train_episodes", config.scenario.train_episodes},
                   {"train_days", config.scenario.train_days},
                   {"eval_days", config.scenario.eval_days},
                   {"x0", config.scenario.x0.as_array()},
                   {"profile",
                    {{"rad_peak", config.scenario.profile.rad_peak},
                     {"day_start_h", config.scenario.profile.day_start_h},
                     {"day_length_h", config.scenario.profile.day_length_h},
                     {"temp_mean", config.scenario.profile.temp_mean},
                     {"temp_amp", config.scenario.profile.temp_amp},
                     {"temp_peak_h", config.scenario.profile.temp_peak_h},
                     {"co2_mean", config.scenario.profile.co2_mean},
                     {"rh_mean", config.scenario.profile.rh_mean},
                     {"noise", config.scenario.profile.noise}}}};
  j["datagen"] = {{"horizon", config.datagen_mpc.horizon},
                  {"explore_dither", config.datagen_mpc.explore_dither},
                  {"solver",
                   {{"iterations", config.datagen_mpc.solver.iterations},
                    {"restarts", config.datagen_mpc.solver.restarts},
                    {"min_step", config.datagen_mpc.solver.min_step}}}};
  std::vector<std::string> kinds, ekinds;
  for (CellKind k : config.training.kinds) kinds.push_back(cell_kind_name(k));
  for (CellKind k : config.evaluation.kinds) ekinds.push_back(cell_kind_name(k));
  j["training"] = {{"kinds", kinds},
                   {"windows", config.training.windows},
                   {"batches", config.training.batches},
                   {"epochs", config.training.epochs},
                   {"learning_rate", config.training.learning_rate},
                   {"sched_step", config.training.sched_step},
                   {"sched_gamma", config.training.sched_gamma},
                   {"dropout", config.training.dropout},
                   {"split_ratio", config.training.split_ratio}};
  j["evaluation"] = {{"kinds", ekinds},
                     {"horizons", config.evaluation.horizons},
                     {"include_oracle", config.evaluation.include_oracle},
                     {"oracle_horizon", config.evaluation.oracle_horizon},
                     {"solver",
                      {{"iterations", config.evaluation.solver.iterations},
                       {"restarts", config.evaluation.solver.restarts},
                       {"min_step", config.evaluation.solver.min_step}}}};
  return j.dump();
}

std::string train_episode_path(const std::string& out_dir, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", index);
  return out_dir + "/episodes/train_" + buf + ".csv";
}

std::string checkpoint_path(const std::string& out_dir, CellKind kind, int window, int batch) {
  return out_dir + "/checkpoints/" + cell_kind_name(kind) + "_w" + std::to_string(window) + "_b" +
         std::to_string(batch) + ".ckpt";
}

std::string best_checkpoint_path(const std::string& out_dir, CellKind kind) {
  return out_dir + "/checkpoints/best_" + cell_kind_name(kind) + ".ckpt";
}

std::vector<std::string> cmd_generate_data(const ExperimentConfig& config,
                                           const std::string& out_dir) {
  ensure_dir(out_dir + "/episodes");
  ensure_dir(out_dir + "/weather");
  const int episodes = config.scenario.train_episodes;
  const int days = config.scenario.train_days;
  std::vector<std::string> artifacts(static_cast<std::size_t>(episodes) * 2);

  const int threads = resolve_threads(config.training.threads, static_cast<std::size_t>(episodes));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(static_cast<std::size_t>(episodes), threads, [&](std::size_t e) {
    try {
      const WeatherProfile profile = scenario_profile(config, static_cast<int>(e));
      // One margin day of weather so every solve sees a full horizon.
      const DisturbanceSeries weather = synth_weather(profile, days + 1);
      MpcConfig mpc = config.datagen_mpc;
      mpc.solver.seed = splitmix64(config.seed ^ (0xDA7A0000ULL + e));

      OraclePredictor oracle;
      ClosedLoopResult run = receding_horizon_control(oracle, weather, config.scenario.x0,
                                                      static_cast<std::int64_t>(days) * 96, mpc);
      run.log.seed = profile.seed;
      run.log.scenario_id = "synthetic_train_" + std::to_string(e);
      run.log.controller_id = "oracle-mpc" + std::to_string(mpc.horizon);
      validate_episode(run.log);

      const std::string episode_path = train_episode_path(out_dir, static_cast<int>(e));
      write_episode_csv(run.log, episode_path);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%03d", static_cast<int>(e));
      const std::string weather_path = out_dir + "/weather/train_" + buf + ".csv";
      write_weather_csv(weather, weather_path);
      artifacts[e * 2] = episode_path;
      artifacts[e * 2 + 1] = weather_path;
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  update_manifest(config, out_dir, "generate-data", artifacts);
  return artifacts;
}

std::vector<std::string> cmd_train(const ExperimentConfig& config, const std::string& out_dir) {
  ensure_dir(out_dir + "/checkpoints");
  const std::vector<EpisodeLog> episodes = load_training_episodes(config, out_dir);
  const auto [train_split, test_split] = split_train_test(episodes, config.training.split_ratio);

  const std::vector<GridCell> cells = grid_cells(config.training);
  std::vector<MetricsRow> rows(cells.size());
  std::vector<std::string> artifacts(cells.size());

  const int threads = resolve_threads(config.training.threads, cells.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    try {
      const GridCell& cell = cells[i];
      TrainConfig tc;
      tc.window = cell.window;
      tc.batch_size = cell.batch;
      tc.epochs = config.training.epochs;
      tc.learning_rate = config.training.learning_rate;
      tc.sched_step = config.training.sched_step;
      tc.sched_gamma = config.training.sched_gamma;
      tc.dropout = config.training.dropout;
      tc.seed = splitmix64(config.seed ^
                           (static_cast<std::uint64_t>(cell.window) * 1000003ULL +
                            static_cast<std::uint64_t>(cell.batch) * 10007ULL +
                            (cell.kind == CellKind::kLstm ? 11ULL : 13ULL)));

      TrainResult result = train(cell.kind, train_split, tc);
      const EvalResult eval = evaluate(result.weights, test_split);

      const std::string path = checkpoint_path(out_dir, cell.kind, cell.window, cell.batch);
      save_checkpoint(result.weights, path);
      rows[i] = {kind_tag(cell.kind), cell.batch, cell.window, eval.mse, eval.rmse};
      artifacts[i] = path;
      std::ostringstream line;
      line << kind_tag(cell.kind) << " w" << cell.window << " b" << cell.batch
           << ": mse=" << eval.mse << " rmse=" << eval.rmse
           << " first/last train loss=" << result.loss_history.front() << "/"
           << result.loss_history.back() << "\n";
      std::cout << line.str();
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  // Table of every grid cell, fixed order.
  std::string csv = "model,batch,window,mse,rmse\n";
  for (const MetricsRow& row : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%.6f\n", row.model.c_str(), row.batch,
                  row.window, row.mse, row.rmse);
    csv += buf;
  }
  const std::string metrics_file = metrics_path(out_dir);
  {
    std::ofstream out(metrics_file, std::ios::binary);
    out << csv;
  }
  artifacts.push_back(metrics_file);

  // Best cell per kind by test MSE, kept under a stable name for evaluation.
  for (CellKind kind : config.training.kinds) {
    const MetricsRow* best = nullptr;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].kind != kind) continue;
      if (!best || rows[i].mse < best->mse) best = &rows[i];
    }
    if (!best) continue;
    const NetworkWeights w =
        load_checkpoint(checkpoint_path(out_dir, kind, best->window, best->batch));
    const std::string path = best_checkpoint_path(out_dir, kind);
    save_checkpoint(w, path);
    artifacts.push_back(path);
  }

  update_manifest(config, out_dir, "train", artifacts);
  return artifacts;
}

namespace {

struct EvalRun {
  std::string label;
  CellKind kind = CellKind::kGru;
  int horizon = 0;
  bool oracle = false;
};

std::vector<std::string> run_evaluation_set(const ExperimentConfig& config,
                                            const std::string& out_dir,
                                            const std::vector<EvalRun>& runs) {
  ensure_dir(out_dir + "/runs");
  ensure_dir(out_dir + "/plots");
  const DisturbanceSeries weather =
      synth_weather(eval_profile(config), config.scenario.eval_days + 1);
  const auto steps = static_cast<std::int64_t>(config.scenario.eval_days) * 96;

  std::vector<RunResult> results(runs.size());
  std::vector<std::string> artifacts;
  const int threads = resolve_threads(config.evaluation.threads, runs.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(runs.size(), threads, [&](std::size_t i) {
    try {
      const EvalRun& run = runs[i];
      MpcConfig mpc;
      mpc.horizon = run.horizon;
      mpc.solver = config.evaluation.solver;
      mpc.solver.seed = splitmix64(config.seed ^ (0xE7A10000ULL + i));

      ClosedLoopResult loop;
      if (run.oracle) {
        OraclePredictor oracle;
        loop = receding_horizon_control(oracle, weather, config.scenario.x0, steps, mpc);
      } else {
        SurrogatePredictor surrogate(load_checkpoint(best_checkpoint_path(out_dir, run.kind)));
        loop = receding_horizon_control(surrogate, weather, config.scenario.x0, steps, mpc);
      }
      loop.log.seed = config.seed;
      loop.log.scenario_id = "synthetic_eval";
      loop.log.controller_id = run.label;
      if (config.smoke) {
        loop.stats.total_solve_s = 0.0;  // wall times are not comparable in CI
        loop.stats.per_step_solve_s.clear();
      }
      results[i] = {run.label, std::move(loop.log), std::move(loop.stats)};
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const std::exception& e) {
      throw CliError("solver", e.what());
    }
  }

  for (const RunResult& result : results) {
    const std::string run_path = out_dir + "/runs/" + result.label + ".csv";
    write_episode_csv(result.log, run_path);
    artifacts.push_back(run_path);
    json stats;
    stats["total_solve_s"] = result.stats.total_solve_s;
    stats["epi_hf_m2"] = result.stats.epi_hf_m2;
    stats["dry_matter_g_m2"] = result.stats.dry_matter_g_m2;
    const std::string stats_path = out_dir + "/runs/" + result.label + "_stats.json";
    std::ofstream sf(stats_path, std::ios::binary);
    sf << stats.dump(2) << "\n";
    artifacts.push_back(stats_path);

    const std::string plot_path = out_dir + "/plots/" + result.label + ".svg";
    emit_svg(result.log, {"y1", "y2", "y3", "y4", "u1", "u2", "u3", "d1"}, plot_path);
    artifacts.push_back(plot_path);
  }

  const std::string report_path = out_dir + "/report.csv";
  write_report_csv(results, report_path);
  artifacts.push_back(report_path);
  return artifacts;
}

}  // namespace

std::vector<std::string> cmd_evaluate(const ExperimentConfig& config, const std::string& out_dir) {
  std::vector<EvalRun> runs;
  for (CellKind kind : config.evaluation.kinds) {
    if (!fs::exists(best_checkpoint_path(out_dir, kind))) {
      throw CliError("data", best_checkpoint_path(out_dir, kind) +
                                 ": missing checkpoint; run train first");
    }
    for (int horizon : config.evaluation.horizons) {
      runs.push_back({kind_tag(kind) + std::to_string(horizon), kind, horizon, false});
    }
  }
  if (config.evaluation.include_oracle) {
    runs.push_back({"MPC" + std::to_string(config.evaluation.oracle_horizon), CellKind::kGru,
                    config.evaluation.oracle_horizon, true});
  }
  auto artifacts = run_evaluation_set(config, out_dir, runs);
  update_manifest(config, out_dir, "evaluate", artifacts);
  return artifacts;
}

std::vector<std::string> cmd_simulate(const ExperimentConfig& config, const std::string& out_dir,
                                      const std::string& policy) {
  ensure_dir(out_dir);
  const DisturbanceSeries weather =
      synth_weather(eval_profile(config), config.scenario.eval_days + 1);
  const auto steps = static_cast<std::int64_t>(config.scenario.eval_days) * 96;

  EpisodeLog log;
  if (policy == "zero" || policy == "constant") {
    const ControlInput constant{kInputMax[0] / 2.0, kInputMax[1] / 2.0, kInputMax[2] / 2.0};
    const ControlPolicy fn = policy == "zero"
                                 ? ControlPolicy(zero_policy)
                                 : ControlPolicy([constant](std::int64_t, const State&,
                                                            const Output&, const Disturbance&) {
                                     return constant;
                                   });
    log = simulate_episode(config.scenario.x0, fn, weather, steps);
  } else if (policy == "oracle-mpc") {
    MpcConfig mpc;
    mpc.solver = config.evaluation.solver;
    mpc.solver.seed = splitmix64(config.seed ^ 0x51301ULL);
    OraclePredictor oracle;
    log = receding_horizon_control(oracle, weather, config.scenario.x0, steps, mpc).log;
  } else if (policy == "surrogate-mpc") {
    MpcConfig mpc;
    mpc.solver = config.evaluation.solver;
    mpc.solver.seed = splitmix64(config.seed ^ 0x51302ULL);
    const CellKind kind = config.evaluation.kinds.empty() ? CellKind::kGru
                                                          : config.evaluation.kinds.back();
    if (!fs::exists(best_checkpoint_path(out_dir, kind))) {
      throw CliError("data", best_checkpoint_path(out_dir, kind) +
                                 ": missing checkpoint; run train first");
    }
    SurrogatePredictor surrogate(load_checkpoint(best_checkpoint_path(out_dir, kind)));
    log = receding_horizon_control(surrogate, weather, config.scenario.x0, steps, mpc).log;
  } else {
    throw CliError("config", "unknown policy '" + policy +
                                 "' (expected zero|constant|oracle-mpc|surrogate-mpc)");
  }
  log.seed = config.seed;
  log.scenario_id = "synthetic_eval";
  log.controller_id = policy;

  const std::string path = out_dir + "/simulate_" + policy + ".csv";
  write_episode_csv(log, path);
  update_manifest(config, out_dir, "simulate", {path});
  return {path};
}

std::vector<std::string> cmd_report(const ExperimentConfig& config, const std::string& out_dir) {
  const std::string runs_dir = out_dir + "/runs";
  if (!fs::exists(runs_dir)) {
    throw CliError("data", runs_dir + ": no evaluation runs; run evaluate first");
  }
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.path().extension() == ".csv") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw CliError("data", runs_dir + ": no run CSV files");

  std::vector<RunResult> results;
  for (const std::string& path : paths) {
    RunResult r;
    r.log = load_episode_csv(path);
    r.label = r.log.controller_id.empty() ? fs::path(path).stem().string() : r.log.controller_id;
    const std::string stats_path = runs_dir + "/" + fs::path(path).stem().string() + "_stats.json";
    if (fs::exists(stats_path)) {
      std::ifstream sf(stats_path);
      json stats;
      try {
        sf >> stats;
        r.stats.total_solve_s = stats.value("total_solve_s", 0.0);
      } catch (const json::exception&) {
      }
    }
    r.stats.epi_hf_m2 = epi(r.log);
    r.stats.dry_matter_g_m2 = r.log.records.back().y.dry_weight_g;
    results.push_back(std::move(r));
  }
  const std::string report_path = out_dir + "/report.csv";
  write_report_csv(results, report_path);
  update_manifest(config, out_dir, "report", {report_path});
  return {report_path};
}

}  // namespace greenhouse
