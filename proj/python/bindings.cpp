#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "greenhouse/episode.hpp"
#include "greenhouse/harness.hpp"
#include "greenhouse/metrics.hpp"
#include "greenhouse/model.hpp"
#include "greenhouse/mpc.hpp"
#include "greenhouse/seqnet.hpp"
#include "greenhouse/svg.hpp"
#include "greenhouse/weather.hpp"

namespace py = pybind11;
using namespace greenhouse;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lettuce greenhouse model, recurrent surrogates and receding-horizon control";

  // --- model ---------------------------------------------------------------
  py::class_<State>(m, "State")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("dry_weight"), py::arg("co2"),
           py::arg("temp"), py::arg("humidity"))
      .def_readwrite("dry_weight", &State::dry_weight)
      .def_readwrite("co2", &State::co2)
      .def_readwrite("temp", &State::temp)
      .def_readwrite("humidity", &State::humidity)
      .def("as_array", &State::as_array);

  py::class_<ControlInput>(m, "ControlInput")
      .def(py::init<>())
      .def(py::init<double, double, double>(), py::arg("co2_injection"), py::arg("ventilation"),
           py::arg("heating"))
      .def_readwrite("co2_injection", &ControlInput::co2_injection)
      .def_readwrite("ventilation", &ControlInput::ventilation)
      .def_readwrite("heating", &ControlInput::heating)
      .def("as_array", &ControlInput::as_array);

  py::class_<Disturbance>(m, "Disturbance")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("radiation"), py::arg("co2_out"),
           py::arg("temp_out"), py::arg("humidity_out"))
      .def_readwrite("radiation", &Disturbance::radiation)
      .def_readwrite("co2_out", &Disturbance::co2_out)
      .def_readwrite("temp_out", &Disturbance::temp_out)
      .def_readwrite("humidity_out", &Disturbance::humidity_out)
      .def("as_array", &Disturbance::as_array);

  py::class_<Output>(m, "Output")
      .def(py::init<>())
      .def_readwrite("dry_weight_g", &Output::dry_weight_g)
      .def_readwrite("co2_ppm", &Output::co2_ppm)
      .def_readwrite("temp_c", &Output::temp_c)
      .def_readwrite("rel_humidity", &Output::rel_humidity)
      .def("as_array", &Output::as_array);

  py::class_<StateRate>(m, "StateRate")
      .def_readonly("dry_weight", &StateRate::dry_weight)
      .def_readonly("co2", &StateRate::co2)
      .def_readonly("temp", &StateRate::temp)
      .def_readonly("humidity", &StateRate::humidity)
      .def("as_array", &StateRate::as_array);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("sample_interval_s", &ModelParams::sample_interval_s)
      .def("validate", &ModelParams::validate);

  m.def("flux_photosynthesis", &flux_photosynthesis, py::arg("x"), py::arg("d"),
        py::arg("params") = ModelParams{});
  m.def("flux_vent_co2", &flux_vent_co2, py::arg("x"), py::arg("u"), py::arg("d"),
        py::arg("params") = ModelParams{});
  m.def("flux_vent_h2o", &flux_vent_h2o, py::arg("x"), py::arg("u"), py::arg("d"),
        py::arg("params") = ModelParams{});
  m.def("flux_transpiration", &flux_transpiration, py::arg("x"), py::arg("params") = ModelParams{});
  m.def("derivatives", &derivatives, py::arg("x"), py::arg("u"), py::arg("d"),
        py::arg("params") = ModelParams{});
  m.def("rk4_step", &rk4_step, py::arg("x"), py::arg("u"), py::arg("d"),
        py::arg("params") = ModelParams{}, py::arg("h") = 900.0);
  m.def("measure", &measure, py::arg("x"), py::arg("params") = ModelParams{});

  // --- weather / episodes ----------------------------------------------------
  py::class_<DisturbanceSeries>(m, "DisturbanceSeries")
      .def(py::init<>())
      .def_readwrite("start_epoch_s", &DisturbanceSeries::start_epoch_s)
      .def_readwrite("interval_s", &DisturbanceSeries::interval_s)
      .def_readwrite("samples", &DisturbanceSeries::samples)
      .def("__len__", &DisturbanceSeries::size);

  py::class_<WeatherProfile>(m, "WeatherProfile")
      .def(py::init<>())
      .def_readwrite("rad_peak", &WeatherProfile::rad_peak)
      .def_readwrite("day_start_h", &WeatherProfile::day_start_h)
      .def_readwrite("day_length_h", &WeatherProfile::day_length_h)
      .def_readwrite("temp_mean", &WeatherProfile::temp_mean)
      .def_readwrite("temp_amp", &WeatherProfile::temp_amp)
      .def_readwrite("temp_peak_h", &WeatherProfile::temp_peak_h)
      .def_readwrite("co2_mean", &WeatherProfile::co2_mean)
      .def_readwrite("rh_mean", &WeatherProfile::rh_mean)
      .def_readwrite("noise", &WeatherProfile::noise)
      .def_readwrite("seed", &WeatherProfile::seed);

  m.def("synth_weather", &synth_weather, py::arg("profile"), py::arg("days"));
  m.def("load_weather_csv", &load_weather_csv, py::arg("path"));
  m.def("write_weather_csv", &write_weather_csv, py::arg("series"), py::arg("path"));
  m.def("resample", &resample, py::arg("series"), py::arg("target_interval_s") = 900);

  py::class_<EpisodeRecord>(m, "EpisodeRecord")
      .def_readwrite("k", &EpisodeRecord::k)
      .def_readwrite("t_s", &EpisodeRecord::t_s)
      .def_readwrite("d", &EpisodeRecord::d)
      .def_readwrite("u", &EpisodeRecord::u)
      .def_readwrite("x", &EpisodeRecord::x)
      .def_readwrite("y", &EpisodeRecord::y);

  py::class_<EpisodeLog>(m, "EpisodeLog")
      .def(py::init<>())
      .def_readwrite("records", &EpisodeLog::records)
      .def_readwrite("seed", &EpisodeLog::seed)
      .def_readwrite("scenario_id", &EpisodeLog::scenario_id)
      .def_readwrite("controller_id", &EpisodeLog::controller_id)
      .def("steps", &EpisodeLog::steps)
      .def("__len__", &EpisodeLog::size);

  m.def("simulate_episode", &simulate_episode, py::arg("x0"), py::arg("policy"),
        py::arg("weather"), py::arg("steps"), py::arg("params") = ModelParams{});
  m.def("write_episode_csv", &write_episode_csv, py::arg("log"), py::arg("path"));
  m.def("load_episode_csv", &load_episode_csv, py::arg("path"));
  m.def("validate_episode", &validate_episode, py::arg("log"),
        py::arg("params") = ModelParams{});
  m.def(
      "split_train_test",
      [](const std::vector<EpisodeLog>& eps, double ratio) {
        return split_train_test(eps, ratio);
      },
      py::arg("episodes"), py::arg("ratio") = 0.8);

  // --- surrogate training ------------------------------------------------------
  py::enum_<CellKind>(m, "CellKind")
      .value("LSTM", CellKind::kLstm)
      .value("GRU", CellKind::kGru);

  py::class_<NetDims>(m, "NetDims")
      .def(py::init<>())
      .def_readwrite("input", &NetDims::input)
      .def_readwrite("hidden", &NetDims::hidden)
      .def_readwrite("output", &NetDims::output)
      .def_readwrite("window", &NetDims::window);

  py::class_<Scaler>(m, "Scaler")
      .def(py::init<>())
      .def_readwrite("min", &Scaler::min)
      .def_readwrite("max", &Scaler::max);

  py::class_<NetworkWeights>(m, "NetworkWeights")
      .def_readonly("kind", &NetworkWeights::kind)
      .def_readonly("dims", &NetworkWeights::dims)
      .def_readonly("scaler", &NetworkWeights::scaler)
      .def_readonly("params", &NetworkWeights::params);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("window", &TrainConfig::window)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("sched_step", &TrainConfig::sched_step)
      .def_readwrite("sched_gamma", &TrainConfig::sched_gamma)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("weights", &TrainResult::weights)
      .def_readonly("loss_history", &TrainResult::loss_history)
      .def_readonly("epoch_seconds", &TrainResult::epoch_seconds);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("mse", &EvalResult::mse)
      .def_readonly("rmse", &EvalResult::rmse);

  m.def("fit_scaler", &fit_scaler, py::arg("train_episodes"));
  m.def("train", &train, py::arg("kind"), py::arg("train_episodes"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", &evaluate, py::arg("weights"), py::arg("test_episodes"),
        py::call_guard<py::gil_scoped_release>());
  m.def("steplr", &steplr, py::arg("lr0"), py::arg("epoch"), py::arg("step_size"),
        py::arg("gamma"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("weights"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("param_count", &param_count, py::arg("kind"), py::arg("dims"));
  m.def("recurrent_param_count", &recurrent_param_count, py::arg("kind"), py::arg("dims"));

  // --- control -----------------------------------------------------------------
  py::class_<SolverSettings>(m, "SolverSettings")
      .def(py::init<>())
      .def_readwrite("iterations", &SolverSettings::iterations)
      .def_readwrite("restarts", &SolverSettings::restarts)
      .def_readwrite("momentum", &SolverSettings::momentum)
      .def_readwrite("step_size", &SolverSettings::step_size)
      .def_readwrite("min_step", &SolverSettings::min_step)
      .def_readwrite("seed", &SolverSettings::seed);

  py::class_<MpcConfig>(m, "MpcConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &MpcConfig::horizon)
      .def_readwrite("yield_weight", &MpcConfig::yield_weight)
      .def_readwrite("input_weights", &MpcConfig::input_weights)
      .def_readwrite("co2_ppm_max", &MpcConfig::co2_ppm_max)
      .def_readwrite("penalty_co2", &MpcConfig::penalty_co2)
      .def_readwrite("penalty_temp", &MpcConfig::penalty_temp)
      .def_readwrite("penalty_humidity", &MpcConfig::penalty_humidity)
      .def_readwrite("penalty_rate", &MpcConfig::penalty_rate)
      .def_readwrite("solver", &MpcConfig::solver);

  py::class_<ControlStats>(m, "ControlStats")
      .def_readonly("total_solve_s", &ControlStats::total_solve_s)
      .def_readonly("epi_hf_m2", &ControlStats::epi_hf_m2)
      .def_readonly("dry_matter_g_m2", &ControlStats::dry_matter_g_m2);

  py::class_<ClosedLoopResult>(m, "ClosedLoopResult")
      .def_readonly("log", &ClosedLoopResult::log)
      .def_readonly("stats", &ClosedLoopResult::stats);

  m.def("temp_bounds",
        [](double radiation) { return temp_bounds(radiation, MpcConfig{}); },
        py::arg("radiation_at_k0"));
  m.def("night_co2_mask",
        [](const ControlInput& u, double radiation) {
          return night_co2_mask(u, radiation, MpcConfig{});
        },
        py::arg("u"), py::arg("radiation_at_k0"));
  m.def("stage_cost",
        [](const ControlInput& u, const Output& y) { return stage_cost(u, y, MpcConfig{}); },
        py::arg("u"), py::arg("y"));
  m.def(
      "oracle_mpc",
      [](const DisturbanceSeries& weather, const State& x0, std::int64_t steps,
         const MpcConfig& config) {
        OraclePredictor oracle;
        return receding_horizon_control(oracle, weather, x0, steps, config);
      },
      py::arg("weather"), py::arg("x0"), py::arg("steps"), py::arg("config") = MpcConfig{},
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "surrogate_mpc",
      [](const NetworkWeights& weights, const DisturbanceSeries& weather, const State& x0,
         std::int64_t steps, const MpcConfig& config) {
        SurrogatePredictor surrogate(weights);
        return receding_horizon_control(surrogate, weather, x0, steps, config);
      },
      py::arg("weights"), py::arg("weather"), py::arg("x0"), py::arg("steps"),
      py::arg("config") = MpcConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("count_input_violations", &count_input_violations, py::arg("log"),
        py::arg("config") = MpcConfig{});

  // --- metrics -----------------------------------------------------------------
  py::class_<PriceBook>(m, "PriceBook")
      .def(py::init<>())
      .def_readwrite("co2_cost", &PriceBook::co2_cost)
      .def_readwrite("heat_cost", &PriceBook::heat_cost)
      .def_readwrite("crop_base", &PriceBook::crop_base)
      .def_readwrite("crop_rate", &PriceBook::crop_rate);

  py::class_<ThermalReport>(m, "ThermalReport")
      .def_readonly("count", &ThermalReport::count)
      .def_readonly("rate_pct", &ThermalReport::rate_pct)
      .def_readonly("mean_day_c", &ThermalReport::mean_day_c)
      .def_readonly("mean_night_c", &ThermalReport::mean_night_c)
      .def_readonly("n_steps", &ThermalReport::n_steps);

  py::class_<HumidityReport>(m, "HumidityReport")
      .def_readonly("count", &HumidityReport::count)
      .def_readonly("rate_pct", &HumidityReport::rate_pct)
      .def_readonly("mean_excess_pct", &HumidityReport::mean_excess_pct)
      .def_readonly("n_steps", &HumidityReport::n_steps);

  m.def("epi", &epi, py::arg("log"), py::arg("prices") = PriceBook{});
  m.def("thermal_violations", &thermal_violations, py::arg("log"));
  m.def("humidity_violations", &humidity_violations, py::arg("log"));

  m.def("emit_svg", &emit_svg, py::arg("log"), py::arg("channels"), py::arg("path"));

  m.attr("__version__") = "0.1.0";
}
