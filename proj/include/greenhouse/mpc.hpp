#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "greenhouse/episode.hpp"
#include "greenhouse/metrics.hpp"
#include "greenhouse/seqnet.hpp"
#include "greenhouse/weather.hpp"

namespace greenhouse {

// First-order solver budget. iterations applies per restart; restart 0 is the
// warm start, further restarts perturb it with seeded noise.
struct SolverSettings {
  int iterations = 200;
  int restarts = 3;
  double momentum = 0.9;
  double step_size = 0.01;  // displacement per iterate, normalized input units
  double min_step = 1e-4;   // step-halving floor; 0 keeps iterating to the budget
  std::uint64_t seed = 0;
};

struct MpcConfig {
  int horizon = 24;  // prediction steps
  double yield_weight = 1000.0;
  std::array<double, 3> input_weights = {10.0, 1.0, 1.0};
  std::array<double, 3> input_min = {kInputMin[0], kInputMin[1], kInputMin[2]};
  std::array<double, 3> input_max = {kInputMax[0], kInputMax[1], kInputMax[2]};
  // Per-interval move limit, one tenth of the input range by default.
  std::array<double, 3> rate_max = {kInputMax[0] / 10.0, kInputMax[1] / 10.0,
                                    kInputMax[2] / 10.0};
  double co2_ppm_max = 1000.0;
  double humidity_min_pct = 50.0;
  double humidity_max_pct = 85.0;
  std::array<double, 2> temp_bounds_night = {10.0, 15.0};
  std::array<double, 2> temp_bounds_day = {15.0, 20.0};
  double night_radiation = 10.0;  // day/night radiation threshold [W m^-2]
  // Soft-constraint weights; violations in ppm, degC and percent respectively.
  double penalty_co2 = 1e3;
  double penalty_temp = 1e3;
  double penalty_humidity = 1e3;
  double penalty_rate = 1e4;  // on normalized rate excess
  // Seeded actuation dither (fraction of the input range) on each applied
  // input, for system-identification corpora; constraints still hold exactly.
  double explore_dither = 0.0;
  SolverSettings solver;

  void validate() const;
};

// Active temperature band for the whole horizon, chosen by the radiation at
// the solve instant.
std::array<double, 2> temp_bounds(double radiation_at_k0, const MpcConfig& config);

// Forces the CO2 injection channel to zero at night; other channels pass
// through.
ControlInput night_co2_mask(const ControlInput& u, double radiation_at_k0,
                            const MpcConfig& config);

// -yield_weight * y1 + sum_j input_weights[j] * u[j]
double stage_cost(const ControlInput& u, const Output& y, const MpcConfig& config);

// One-step output predictor used inside the optimizer. predict() must be
// called before vjp() with the same plan; vjp is only available when
// supports_vjp() is true.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void reset(const State& x0, const Output& y0, const Disturbance& d0) = 0;
  // Record applied step k: weather and input, the measurement the input was
  // chosen against, and the resulting measurement/state.
  virtual void observe(const Disturbance& d, const ControlInput& u, const Output& y_before,
                       const Output& y_after, const State& x_after) = 0;
  // Predicted outputs y(k0+1 .. k0+Np); forecast[j] = d(k0+j).
  virtual void predict(const std::vector<ControlInput>& plan,
                       const std::vector<Disturbance>& forecast, std::vector<Output>& out) = 0;
  virtual bool supports_vjp() const = 0;
  // Accumulate d(loss)/d(plan) from d(loss)/d(predicted outputs), raw units.
  virtual void vjp(const std::vector<ControlInput>& plan,
                   const std::vector<Disturbance>& forecast,
                   const std::vector<std::array<double, 4>>& dy,
                   std::vector<std::array<double, 3>>& du);
};

// Exact predictor: integrates the physical model from the true current state.
// predict() also propagates step tangents so gradients come from an adjoint
// sweep rather than per-coordinate differencing.
class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(const ModelParams& params = ModelParams{});
  void reset(const State& x0, const Output& y0, const Disturbance& d0) override;
  void observe(const Disturbance& d, const ControlInput& u, const Output& y_before,
               const Output& y_after, const State& x_after) override;
  void predict(const std::vector<ControlInput>& plan, const std::vector<Disturbance>& forecast,
               std::vector<Output>& out) override;
  bool supports_vjp() const override { return true; }
  void vjp(const std::vector<ControlInput>& plan, const std::vector<Disturbance>& forecast,
           const std::vector<std::array<double, 4>>& dy,
           std::vector<std::array<double, 3>>& du) override;

 private:
  ModelParams params_;
  State x_;
  // predict() scratch kept for vjp()
  std::vector<std::array<double, 4>> states_;
  std::vector<std::array<std::array<double, 4>, 4>> step_jx_;
  std::vector<std::array<std::array<double, 3>, 4>> step_ju_;
};

// Learned predictor: rolls a trained network forward, feeding its own
// predictions back into the input window.
class SurrogatePredictor : public Predictor {
 public:
  explicit SurrogatePredictor(NetworkWeights weights);
  void reset(const State& x0, const Output& y0, const Disturbance& d0) override;
  void observe(const Disturbance& d, const ControlInput& u, const Output& y_before,
               const Output& y_after, const State& x_after) override;
  void predict(const std::vector<ControlInput>& plan, const std::vector<Disturbance>& forecast,
               std::vector<Output>& out) override;
  bool supports_vjp() const override { return true; }
  void vjp(const std::vector<ControlInput>& plan, const std::vector<Disturbance>& forecast,
           const std::vector<std::array<double, 4>>& dy,
           std::vector<std::array<double, 3>>& du) override;

  const NetworkWeights& weights() const { return weights_; }

 private:
  struct HistoryRow {
    Disturbance d;
    ControlInput u;
    Output y;
  };

  void build_rows(const std::vector<ControlInput>& plan,
                  const std::vector<Disturbance>& forecast, int np);

  NetworkWeights weights_;
  std::deque<HistoryRow> history_;  // most recent window-1 completed steps
  Output y_cur_;
  // predict() scratch kept for vjp()
  std::vector<double> rows_;              // (window-1+Np) x features, normalized
  std::vector<std::array<double, 4>> preds_raw_;
  std::vector<ForwardCache> caches_;
};

// Everything solve_horizon needs besides the predictor.
struct HorizonContext {
  std::int64_t k0 = 0;
  double radiation_at_k0 = 0.0;
  ControlInput u_prev;  // previously applied input (zero at episode start)
  std::vector<Disturbance> forecast;
};

struct ControlPlan {
  std::vector<ControlInput> inputs;
  double objective = 0.0;
  int iterations = 0;
  int best_restart = 0;

  bool feasible(const ControlInput& u_prev, double radiation_at_k0,
                const MpcConfig& config) const;
};

// Penalized horizon objective: stage costs pairing u(k0+j) with the predicted
// y(k0+j+1), soft output-bound penalties, and soft rate penalties. Hard box
// bounds and the night mask are handled by projection in the solver, not here.
double horizon_objective(const std::vector<ControlInput>& plan, Predictor& predictor,
                         const HorizonContext& ctx, const MpcConfig& config);

// Projected gradient descent with momentum and step halving; warm start plus
// seeded perturbation restarts; the returned plan always satisfies box, rate
// and night-mask constraints and never scores worse than the projected warm
// start.
ControlPlan solve_horizon(Predictor& predictor, const HorizonContext& ctx,
                          const MpcConfig& config, const ControlPlan* warm_start = nullptr);

// Box + rate clamp + night mask, applied sequentially along the plan. The
// mask overrides the rate bound on the CO2 channel at day-night transitions.
void enforce_plan_feasibility(std::vector<ControlInput>& plan, const ControlInput& u_prev,
                              double radiation_at_k0, const MpcConfig& config);

// Post-hoc validation of applied inputs in a closed-loop log; returns the
// number of violating steps (0 for a correct controller).
std::size_t count_input_violations(const EpisodeLog& log, const MpcConfig& config);

struct ClosedLoopResult {
  EpisodeLog log;
  ControlStats stats;
};

// Receding-horizon loop against the physical simulator; the predictor only
// lives inside the optimizer. Records per-step solver wall time.
ClosedLoopResult receding_horizon_control(Predictor& predictor, const DisturbanceSeries& weather,
                                          const State& x0, std::int64_t steps,
                                          const MpcConfig& config,
                                          const ModelParams& params = ModelParams{});

}  // namespace greenhouse
