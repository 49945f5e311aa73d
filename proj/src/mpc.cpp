#include "greenhouse/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "greenhouse/rng.hpp"

namespace greenhouse {

namespace {

using ZPlan = std::vector<std::array<double, 3>>;

double sq(double v) { return v * v; }

double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Rate clamp whose result passes |u - prev| <= r under exact floating-point
// comparison; rounding of prev + r may otherwise exceed the bound by one ulp.
double rate_clamp_exact(double prev, double desired, double r) {
  double delta = clampd(desired - prev, -r, r);
  double u = prev + delta;
  if (std::fabs(u - prev) > r) {
    u = prev + std::copysign(r, delta);
    if (std::fabs(u - prev) > r) u = prev;
  }
  return u;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc config: horizon must be >= 1");
  for (int c = 0; c < 3; ++c) {
    if (!(input_min[c] <= input_max[c])) {
      throw std::invalid_argument("mpc config: input_min must not exceed input_max");
    }
    if (!(rate_max[c] > 0.0)) throw std::invalid_argument("mpc config: rate_max must be positive");
  }
  if (penalty_co2 < 0.0 || penalty_temp < 0.0 || penalty_humidity < 0.0 || penalty_rate < 0.0) {
    throw std::invalid_argument("mpc config: penalties must be non-negative");
  }
  if (solver.iterations < 1 || solver.restarts < 1) {
    throw std::invalid_argument("mpc config: solver budget must be positive");
  }
}

std::array<double, 2> temp_bounds(double radiation_at_k0, const MpcConfig& config) {
  return radiation_at_k0 < config.night_radiation ? config.temp_bounds_night
                                                  : config.temp_bounds_day;
}

ControlInput night_co2_mask(const ControlInput& u, double radiation_at_k0,
                            const MpcConfig& config) {
  ControlInput out = u;
  if (radiation_at_k0 < config.night_radiation) out.co2_injection = 0.0;
  return out;
}

double stage_cost(const ControlInput& u, const Output& y, const MpcConfig& config) {
  const auto ua = u.as_array();
  double cost = -config.yield_weight * y.dry_weight_g;
  for (int c = 0; c < 3; ++c) cost += config.input_weights[c] * ua[c];
  return cost;
}

void Predictor::vjp(const std::vector<ControlInput>&, const std::vector<Disturbance>&,
                    const std::vector<std::array<double, 4>>&,
                    std::vector<std::array<double, 3>>&) {
  throw std::logic_error("predictor does not provide analytic gradients");
}

// --- oracle -------------------------------------------------------------

namespace {

using Mat4 = std::array<std::array<double, 4>, 4>;
using Mat43 = std::array<std::array<double, 3>, 4>;

// Jacobians of the continuous-time field at one point.
void field_jacobians(const std::array<double, 4>& x, const ControlInput& u, const Disturbance& d,
                     const ModelParams& p, Mat4& jx, Mat43& ju) {
  for (auto& row : jx) row = {0.0, 0.0, 0.0, 0.0};
  for (auto& row : ju) row = {0.0, 0.0, 0.0};

  const double resp_c = std::pow(10.0, 2.5);
  const double canopy = 1.0 - std::exp(-p.canopy_extinction * x[0]);
  const double dcanopy = p.canopy_extinction * std::exp(-p.canopy_extinction * x[0]);
  const double g = -p.phot_temp_a * x[2] * x[2] + p.phot_temp_b * x[2] - p.phot_temp_c;
  const double dg = -2.0 * p.phot_temp_a * x[2] + p.phot_temp_b;
  const double light = p.light_use_efficiency * d.radiation;
  const double drive = g * (x[1] - p.co2_compensation);
  const double saturation = light + drive;

  double phot_x1 = 0.0, phot_x2 = 0.0, phot_x3 = 0.0;
  if (std::fabs(saturation) >= 1e-12) {
    const double common = canopy * light * light / (saturation * saturation);
    phot_x1 = dcanopy * light * drive / saturation;
    phot_x2 = common * g;
    phot_x3 = common * dg * (x[1] - p.co2_compensation);
  }

  const double dresp_x1 = 2.0 * x[0] * x[2] / resp_c;
  const double dresp_x3 = x[0] * x[0] / resp_c;
  const double vent = u.ventilation * 1e-3 + p.leakage;

  jx[0][0] = p.yield_factor * phot_x1 - p.respiration_rate * dresp_x1;
  jx[0][1] = p.yield_factor * phot_x2;
  jx[0][2] = p.yield_factor * phot_x3 - p.respiration_rate * dresp_x3;

  jx[1][0] = (-phot_x1 + p.resp_co2_rate * dresp_x1) / p.co2_capacity;
  jx[1][1] = (-phot_x2 - vent) / p.co2_capacity;
  jx[1][2] = (-phot_x3 + p.resp_co2_rate * dresp_x3) / p.co2_capacity;

  jx[2][2] = -(p.vent_heat_coeff * u.ventilation * 1e-3 + p.heat_loss_coeff) / p.heat_capacity;

  const double sat_q = p.vapour_pressure_num / (p.vapour_gas_const * (x[2] + p.kelvin_offset)) *
                       std::exp(p.satvap_exp_a * x[2] / (x[2] + p.satvap_exp_b));
  const double dlog_q = -1.0 / (x[2] + p.kelvin_offset) +
                        p.satvap_exp_a * p.satvap_exp_b /
                            ((x[2] + p.satvap_exp_b) * (x[2] + p.satvap_exp_b));
  jx[3][0] = p.transp_coeff * dcanopy * (sat_q - x[3]) / p.humidity_capacity;
  jx[3][2] = p.transp_coeff * canopy * sat_q * dlog_q / p.humidity_capacity;
  jx[3][3] = (-p.transp_coeff * canopy - vent) / p.humidity_capacity;

  ju[1][0] = 1e-6 / p.co2_capacity;
  ju[1][1] = -1e-3 * (x[1] - d.co2_out) / p.co2_capacity;
  ju[2][1] = -p.vent_heat_coeff * 1e-3 * (x[2] - d.temp_out) / p.heat_capacity;
  ju[2][2] = 1.0 / p.heat_capacity;
  ju[3][1] = -1e-3 * (x[3] - d.humidity_out) / p.humidity_capacity;
}

// d(output)/d(state) at one state.
Mat4 measure_jacobian(const std::array<double, 4>& x, const ModelParams& p) {
  Mat4 c{};
  for (auto& row : c) row = {0.0, 0.0, 0.0, 0.0};
  const double kelvin = x[2] + p.kelvin_offset;
  c[0][0] = 1e3;
  c[1][1] = 1e3 * p.gas_constant * kelvin / (p.atm_pressure_kpa * p.co2_molar_mass);
  c[1][2] = 1e3 * p.gas_constant * x[1] / (p.atm_pressure_kpa * p.co2_molar_mass);
  c[2][2] = 1.0;
  const double expo = std::exp(p.satvap_exp_a * x[2] / (x[2] + p.satvap_exp_b));
  c[3][3] = 1e2 * p.gas_constant * kelvin / (11.0 * expo);
  c[3][2] = 1e2 * p.gas_constant * x[3] / (11.0 * expo) *
            (1.0 - kelvin * p.satvap_exp_a * p.satvap_exp_b /
                       ((x[2] + p.satvap_exp_b) * (x[2] + p.satvap_exp_b)));
  return c;
}

Mat4 mat_mul(const Mat4& a, const Mat4& b) {
  Mat4 out{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a[i][k] * b[k][j];
      out[i][j] = acc;
    }
  }
  return out;
}

Mat43 mat_mul43(const Mat4& a, const Mat43& b) {
  Mat43 out{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a[i][k] * b[k][j];
      out[i][j] = acc;
    }
  }
  return out;
}

}  // namespace

OraclePredictor::OraclePredictor(const ModelParams& params) : params_(params) {}

void OraclePredictor::reset(const State& x0, const Output&, const Disturbance&) { x_ = x0; }

void OraclePredictor::observe(const Disturbance&, const ControlInput&, const Output&,
                              const Output&, const State& x_after) {
  x_ = x_after;
}

void OraclePredictor::predict(const std::vector<ControlInput>& plan,
                              const std::vector<Disturbance>& forecast,
                              std::vector<Output>& out) {
  if (forecast.size() < plan.size()) {
    throw std::invalid_argument("oracle predict: forecast shorter than plan");
  }
  const double h = params_.sample_interval_s;
  out.resize(plan.size());
  step_jx_.resize(plan.size());
  step_ju_.resize(plan.size());
  states_.resize(plan.size() + 1);

  State x = x_;
  states_[0] = x.as_array();
  for (std::size_t j = 0; j < plan.size(); ++j) {
    // One RK4 step with tangent propagation for dx(next)/dx and dx(next)/du.
    const std::array<double, 4> x0 = x.as_array();
    Mat4 eye{};
    for (int i = 0; i < 4; ++i) eye[i][i] = 1.0;

    std::array<double, 4> stage = x0;
    std::array<std::array<double, 4>, 4> k{};
    Mat4 dk_x[4];
    Mat43 dk_u[4];
    for (int s = 0; s < 4; ++s) {
      const double scale = s == 0 ? 0.0 : (s == 3 ? h : 0.5 * h);
      if (s > 0) {
        for (int i = 0; i < 4; ++i) stage[i] = x0[i] + scale * k[s - 1][i];
      }
      const StateRate r =
          derivatives(State::from_array(stage), plan[j], forecast[j], params_);
      k[s] = r.as_array();
      Mat4 jx;
      Mat43 ju;
      field_jacobians(stage, plan[j], forecast[j], params_, jx, ju);
      if (s == 0) {
        dk_x[0] = jx;
        dk_u[0] = ju;
      } else {
        Mat4 dstage = eye;
        for (int i = 0; i < 4; ++i) {
          for (int m = 0; m < 4; ++m) dstage[i][m] += scale * dk_x[s - 1][i][m];
        }
        dk_x[s] = mat_mul(jx, dstage);
        Mat43 dstage_u = dk_u[s - 1];
        for (auto& row : dstage_u) {
          for (double& v : row) v *= scale;
        }
        dk_u[s] = mat_mul43(jx, dstage_u);
        for (int i = 0; i < 4; ++i) {
          for (int m = 0; m < 3; ++m) dk_u[s][i][m] += ju[i][m];
        }
      }
    }

    std::array<double, 4> next{};
    Mat4 ax = eye;
    Mat43 bu{};
    for (int i = 0; i < 4; ++i) {
      next[i] = x0[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
      for (int m = 0; m < 4; ++m) {
        ax[i][m] += h / 6.0 *
                    (dk_x[0][i][m] + 2.0 * dk_x[1][i][m] + 2.0 * dk_x[2][i][m] + dk_x[3][i][m]);
      }
      for (int m = 0; m < 3; ++m) {
        bu[i][m] = h / 6.0 *
                   (dk_u[0][i][m] + 2.0 * dk_u[1][i][m] + 2.0 * dk_u[2][i][m] + dk_u[3][i][m]);
      }
    }
    // Clamped channels stop propagating sensitivity.
    for (int i : {0, 1, 3}) {
      if (next[i] < 0.0) {
        next[i] = 0.0;
        ax[i] = {0.0, 0.0, 0.0, 0.0};
        bu[i] = {0.0, 0.0, 0.0};
      }
    }
    x = State::from_array(next);
    states_[j + 1] = next;
    step_jx_[j] = ax;
    step_ju_[j] = bu;
    out[j] = measure(x, params_);
  }
}

void OraclePredictor::vjp(const std::vector<ControlInput>& plan,
                          const std::vector<Disturbance>& forecast,
                          const std::vector<std::array<double, 4>>& dy,
                          std::vector<std::array<double, 3>>& du) {
  if (dy.size() != plan.size()) throw std::invalid_argument("oracle vjp: dy size mismatch");
  if (step_jx_.size() != plan.size()) {
    throw std::logic_error("oracle vjp: call predict with the same plan first");
  }
  (void)forecast;
  du.assign(plan.size(), {});
  std::array<double, 4> lambda{};
  for (std::size_t j = plan.size(); j-- > 0;) {
    const Mat4 c = measure_jacobian(states_[j + 1], params_);
    for (int col = 0; col < 4; ++col) {
      double acc = 0.0;
      for (int row = 0; row < 4; ++row) acc += c[row][col] * dy[j][static_cast<std::size_t>(row)];
      lambda[static_cast<std::size_t>(col)] += acc;
    }
    for (int m = 0; m < 3; ++m) {
      double acc = 0.0;
      for (int row = 0; row < 4; ++row) acc += step_ju_[j][row][m] * lambda[static_cast<std::size_t>(row)];
      du[j][static_cast<std::size_t>(m)] = acc;
    }
    std::array<double, 4> next_lambda{};
    for (int col = 0; col < 4; ++col) {
      double acc = 0.0;
      for (int row = 0; row < 4; ++row) acc += step_jx_[j][row][col] * lambda[static_cast<std::size_t>(row)];
      next_lambda[static_cast<std::size_t>(col)] = acc;
    }
    lambda = next_lambda;
  }
}

// --- surrogate ------------------------------------------------------------

SurrogatePredictor::SurrogatePredictor(NetworkWeights weights) : weights_(std::move(weights)) {}

void SurrogatePredictor::reset(const State&, const Output& y0, const Disturbance& d0) {
  history_.clear();
  const int w = weights_.dims.window;
  for (int i = 0; i < w - 1; ++i) history_.push_back({d0, ControlInput{}, y0});
  y_cur_ = y0;
}

void SurrogatePredictor::observe(const Disturbance& d, const ControlInput& u,
                                 const Output& y_before, const Output& y_after, const State&) {
  history_.push_back({d, u, y_before});
  while (history_.size() > static_cast<std::size_t>(weights_.dims.window - 1)) {
    history_.pop_front();
  }
  y_cur_ = y_after;
}

void SurrogatePredictor::build_rows(const std::vector<ControlInput>& plan,
                                    const std::vector<Disturbance>& forecast, int np) {
  const int w = weights_.dims.window;
  const Scaler& sc = weights_.scaler;
  const int total = w - 1 + np;
  rows_.assign(static_cast<std::size_t>(total) * kFeatureCount, 0.0);

  auto write_row = [&](int row, const Disturbance& d, const ControlInput& u, const Output* y) {
    EpisodeRecord rec;
    rec.d = d;
    rec.u = u;
    if (y) rec.y = *y;
    const auto f = record_features(rec);
    double* slot = rows_.data() + static_cast<std::size_t>(row) * kFeatureCount;
    for (int c = 0; c < kFeatureCount; ++c) slot[c] = sc.normalize(c, f[c]);
  };

  int row = 0;
  for (const HistoryRow& hr : history_) write_row(row++, hr.d, hr.u, &hr.y);
  // Lookahead rows: measured y only at the solve instant; later y features are
  // filled with predictions as they are produced.
  write_row(row, forecast.at(0), plan.at(0), &y_cur_);
  for (int i = 1; i < np; ++i) {
    write_row(w - 1 + i, forecast.at(static_cast<std::size_t>(i)),
              plan.at(static_cast<std::size_t>(i)), nullptr);
  }
}

void SurrogatePredictor::predict(const std::vector<ControlInput>& plan,
                                 const std::vector<Disturbance>& forecast,
                                 std::vector<Output>& out) {
  const int np = static_cast<int>(plan.size());
  if (np < 1) throw std::invalid_argument("surrogate predict: empty plan");
  if (forecast.size() < plan.size()) {
    throw std::invalid_argument("surrogate predict: forecast shorter than plan");
  }
  const int w = weights_.dims.window;
  const Scaler& sc = weights_.scaler;
  build_rows(plan, forecast, np);
  preds_raw_.assign(static_cast<std::size_t>(np), {});
  caches_.resize(static_cast<std::size_t>(np));
  out.resize(static_cast<std::size_t>(np));

  for (int j = 0; j < np; ++j) {
    const double* window = rows_.data() + static_cast<std::size_t>(j) * kFeatureCount;
    net_forward(weights_, window, w, false, 0.0, nullptr, caches_[static_cast<std::size_t>(j)]);
    std::array<double, 4> raw{};
    for (int c = 0; c < kTargetCount; ++c) {
      raw[c] = sc.denormalize(kFeatureCount + c, caches_[static_cast<std::size_t>(j)].pred[c]);
    }
    preds_raw_[static_cast<std::size_t>(j)] = raw;
    out[static_cast<std::size_t>(j)] = Output::from_array(raw);
    if (j + 1 < np) {
      // Feed the prediction back into the next rows' measurement features.
      double* slot = rows_.data() + static_cast<std::size_t>(w - 1 + j + 1) * kFeatureCount;
      for (int c = 0; c < kTargetCount; ++c) {
        slot[7 + c] = sc.normalize(7 + c, raw[c]);
      }
    }
  }
}

void SurrogatePredictor::vjp(const std::vector<ControlInput>& plan,
                             const std::vector<Disturbance>& forecast,
                             const std::vector<std::array<double, 4>>& dy,
                             std::vector<std::array<double, 3>>& du) {
  const int np = static_cast<int>(plan.size());
  if (dy.size() != plan.size()) throw std::invalid_argument("surrogate vjp: dy size mismatch");
  if (caches_.size() != plan.size()) {
    throw std::logic_error("surrogate vjp: call predict with the same plan first");
  }
  (void)forecast;
  const int w = weights_.dims.window;
  const Scaler& sc = weights_.scaler;

  du.assign(static_cast<std::size_t>(np), {});
  std::vector<std::array<double, 4>> dy_acc(dy);
  std::vector<double> wgrad(static_cast<std::size_t>(w) * kFeatureCount);

  for (int j = np - 1; j >= 0; --j) {
    std::array<double, 4> dpred{};
    for (int c = 0; c < kTargetCount; ++c) {
      dpred[c] = dy_acc[static_cast<std::size_t>(j)][c] * sc.span(kFeatureCount + c);
    }
    std::fill(wgrad.begin(), wgrad.end(), 0.0);
    const double* window = rows_.data() + static_cast<std::size_t>(j) * kFeatureCount;
    net_backward(weights_, window, w, caches_[static_cast<std::size_t>(j)], dpred, nullptr,
                 wgrad.data());
    for (int r = 0; r < w; ++r) {
      const int i = j + r - (w - 1);  // lookahead offset of this row
      if (i < 0) continue;
      const double* row = wgrad.data() + static_cast<std::size_t>(r) * kFeatureCount;
      for (int c = 0; c < 3; ++c) {
        du[static_cast<std::size_t>(i)][c] += row[4 + c] / sc.span(4 + c);
      }
      if (i >= 1) {
        for (int c = 0; c < kTargetCount; ++c) {
          dy_acc[static_cast<std::size_t>(i - 1)][c] += row[7 + c] / sc.span(7 + c);
        }
      }
    }
  }
}

// --- objective --------------------------------------------------------------

namespace {

double output_penalty(const Output& y, const std::array<double, 2>& tb, const MpcConfig& c) {
  double p = 0.0;
  if (y.co2_ppm > c.co2_ppm_max) p += c.penalty_co2 * sq(y.co2_ppm - c.co2_ppm_max);
  if (y.temp_c < tb[0]) p += c.penalty_temp * sq(tb[0] - y.temp_c);
  if (y.temp_c > tb[1]) p += c.penalty_temp * sq(y.temp_c - tb[1]);
  if (y.rel_humidity < c.humidity_min_pct) {
    p += c.penalty_humidity * sq(c.humidity_min_pct - y.rel_humidity);
  }
  if (y.rel_humidity > c.humidity_max_pct) {
    p += c.penalty_humidity * sq(y.rel_humidity - c.humidity_max_pct);
  }
  return p;
}

void output_penalty_grad(const Output& y, const std::array<double, 2>& tb, const MpcConfig& c,
                         std::array<double, 4>& dy) {
  if (y.co2_ppm > c.co2_ppm_max) dy[1] += 2.0 * c.penalty_co2 * (y.co2_ppm - c.co2_ppm_max);
  if (y.temp_c < tb[0]) dy[2] -= 2.0 * c.penalty_temp * (tb[0] - y.temp_c);
  if (y.temp_c > tb[1]) dy[2] += 2.0 * c.penalty_temp * (y.temp_c - tb[1]);
  if (y.rel_humidity < c.humidity_min_pct) {
    dy[3] -= 2.0 * c.penalty_humidity * (c.humidity_min_pct - y.rel_humidity);
  }
  if (y.rel_humidity > c.humidity_max_pct) {
    dy[3] += 2.0 * c.penalty_humidity * (y.rel_humidity - c.humidity_max_pct);
  }
}

struct ZSpace {
  std::array<double, 3> lo, span, rate_bound;

  explicit ZSpace(const MpcConfig& c) {
    for (int i = 0; i < 3; ++i) {
      lo[i] = c.input_min[i];
      span[i] = c.input_max[i] - c.input_min[i];
      if (!(span[i] > 0.0)) span[i] = 1.0;
      rate_bound[i] = c.rate_max[i] / span[i];
    }
  }

  std::array<double, 3> to_z(const ControlInput& u) const {
    const auto a = u.as_array();
    return {(a[0] - lo[0]) / span[0], (a[1] - lo[1]) / span[1], (a[2] - lo[2]) / span[2]};
  }
  ControlInput to_u(const std::array<double, 3>& z) const {
    return ControlInput{lo[0] + z[0] * span[0], lo[1] + z[1] * span[1], lo[2] + z[2] * span[2]};
  }
};

double rate_penalty(const ZPlan& z, const std::array<double, 3>& z_prev, const ZSpace& zs,
                    const MpcConfig& c) {
  double p = 0.0;
  const std::array<double, 3>* prev = &z_prev;
  for (const auto& zj : z) {
    for (int ch = 0; ch < 3; ++ch) {
      const double excess = std::fabs(zj[ch] - (*prev)[ch]) - zs.rate_bound[ch];
      if (excess > 0.0) p += c.penalty_rate * excess * excess;
    }
    prev = &zj;
  }
  return p;
}

void rate_penalty_grad(const ZPlan& z, const std::array<double, 3>& z_prev, const ZSpace& zs,
                       const MpcConfig& c, ZPlan& dz) {
  const std::array<double, 3>* prev = &z_prev;
  for (std::size_t j = 0; j < z.size(); ++j) {
    for (int ch = 0; ch < 3; ++ch) {
      const double delta = z[j][ch] - (*prev)[ch];
      const double excess = std::fabs(delta) - zs.rate_bound[ch];
      if (excess > 0.0) {
        const double g = 2.0 * c.penalty_rate * excess * (delta >= 0.0 ? 1.0 : -1.0);
        dz[j][ch] += g;
        if (j > 0) dz[j - 1][ch] -= g;
      }
    }
    prev = &z[j];
  }
}

struct ObjectiveEval {
  Predictor& predictor;
  const HorizonContext& ctx;
  const MpcConfig& config;
  const ZSpace& zs;
  std::array<double, 2> tb;
  std::array<double, 3> z_prev;
  std::vector<Output> outs;
  std::vector<ControlInput> plan;

  double operator()(const ZPlan& z) {
    plan.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) plan[j] = zs.to_u(z[j]);
    predictor.predict(plan, ctx.forecast, outs);
    double obj = rate_penalty(z, z_prev, zs, config);
    for (std::size_t j = 0; j < z.size(); ++j) {
      obj += stage_cost(plan[j], outs[j], config) + output_penalty(outs[j], tb, config);
    }
    return obj;
  }
};

}  // namespace

double horizon_objective(const std::vector<ControlInput>& plan, Predictor& predictor,
                         const HorizonContext& ctx, const MpcConfig& config) {
  if (plan.empty()) throw std::invalid_argument("horizon_objective: empty plan");
  if (ctx.forecast.size() < plan.size()) {
    throw std::invalid_argument("horizon_objective: forecast shorter than plan");
  }
  const ZSpace zs(config);
  ObjectiveEval eval{predictor, ctx, config, zs, temp_bounds(ctx.radiation_at_k0, config),
                     zs.to_z(ctx.u_prev)};
  ZPlan z(plan.size());
  for (std::size_t j = 0; j < plan.size(); ++j) z[j] = zs.to_z(plan[j]);
  return eval(z);
}

void enforce_plan_feasibility(std::vector<ControlInput>& plan, const ControlInput& u_prev,
                              double radiation_at_k0, const MpcConfig& config) {
  const bool night = radiation_at_k0 < config.night_radiation;
  std::array<double, 3> prev = u_prev.as_array();
  for (ControlInput& u : plan) {
    auto a = u.as_array();
    for (int c = 0; c < 3; ++c) {
      a[c] = clampd(a[c], config.input_min[c], config.input_max[c]);
      a[c] = rate_clamp_exact(prev[c], a[c], config.rate_max[c]);
    }
    if (night) a[0] = 0.0;
    u = ControlInput::from_array(a);
    prev = a;
  }
}

bool ControlPlan::feasible(const ControlInput& u_prev, double radiation_at_k0,
                           const MpcConfig& config) const {
  const bool night = radiation_at_k0 < config.night_radiation;
  std::array<double, 3> prev = u_prev.as_array();
  for (const ControlInput& u : inputs) {
    const auto a = u.as_array();
    for (int c = 0; c < 3; ++c) {
      if (!(a[c] >= config.input_min[c] && a[c] <= config.input_max[c])) return false;
      const bool masked = night && c == 0;
      if (masked) {
        if (a[c] != 0.0) return false;
      } else if (std::fabs(a[c] - prev[c]) > config.rate_max[c]) {
        return false;
      }
    }
    prev = a;
  }
  return true;
}

ControlPlan solve_horizon(Predictor& predictor, const HorizonContext& ctx,
                          const MpcConfig& config, const ControlPlan* warm_start) {
  config.validate();
  const int np = config.horizon;
  if (ctx.forecast.size() < static_cast<std::size_t>(np)) {
    throw std::invalid_argument("solve_horizon: forecast shorter than the horizon");
  }
  const bool night = ctx.radiation_at_k0 < config.night_radiation;
  const ZSpace zs(config);

  ObjectiveEval eval{predictor, ctx, config, zs, temp_bounds(ctx.radiation_at_k0, config),
                     zs.to_z(ctx.u_prev)};

  auto project = [&](ZPlan& z) {
    for (auto& zj : z) {
      for (int c = 0; c < 3; ++c) zj[c] = clampd(zj[c], 0.0, 1.0);
      if (night) zj[0] = 0.0;
    }
  };

  // Box + mask + sequential rate clamp, mirroring enforce_plan_feasibility.
  const std::array<double, 3> z_prev_arr = zs.to_z(ctx.u_prev);
  auto project_feasible = [&](ZPlan& z) {
    project(z);
    std::array<double, 3> prev = z_prev_arr;
    for (auto& zj : z) {
      for (int c = 0; c < 3; ++c) {
        zj[c] = clampd(zj[c], prev[c] - zs.rate_bound[c], prev[c] + zs.rate_bound[c]);
        zj[c] = clampd(zj[c], 0.0, 1.0);
      }
      if (night) zj[0] = 0.0;
      prev = zj;
    }
  };

  // Warm start (shifted previous plan) or a zero plan.
  ZPlan z_start(static_cast<std::size_t>(np), {0.0, 0.0, 0.0});
  if (warm_start && !warm_start->inputs.empty()) {
    for (int j = 0; j < np; ++j) {
      const auto& src = warm_start->inputs[std::min<std::size_t>(
          static_cast<std::size_t>(j), warm_start->inputs.size() - 1)];
      z_start[static_cast<std::size_t>(j)] = zs.to_z(src);
    }
  }
  project(z_start);

  // Feasibility-passed start is the floor every restart must beat.
  ControlPlan best;
  best.inputs.resize(static_cast<std::size_t>(np));
  for (int j = 0; j < np; ++j) {
    best.inputs[static_cast<std::size_t>(j)] = zs.to_u(z_start[static_cast<std::size_t>(j)]);
  }
  enforce_plan_feasibility(best.inputs, ctx.u_prev, ctx.radiation_at_k0, config);
  best.objective = horizon_objective(best.inputs, predictor, ctx, config);
  best.best_restart = -1;

  const bool use_vjp = predictor.supports_vjp();
  std::vector<std::array<double, 4>> dy;
  std::vector<std::array<double, 3>> du;
  ZPlan grad(static_cast<std::size_t>(np));
  int total_iters = 0;

  auto compute_grad = [&](const ZPlan& z) {
    for (auto& g : grad) g = {0.0, 0.0, 0.0};
    if (use_vjp) {
      // refresh predictor caches for exactly this plan
      eval(z);
      dy.assign(static_cast<std::size_t>(np), {});
      for (int j = 0; j < np; ++j) {
        dy[static_cast<std::size_t>(j)][0] = -config.yield_weight;
        output_penalty_grad(eval.outs[static_cast<std::size_t>(j)], eval.tb, config,
                            dy[static_cast<std::size_t>(j)]);
      }
      predictor.vjp(eval.plan, ctx.forecast, dy, du);
      for (int j = 0; j < np; ++j) {
        for (int c = 0; c < 3; ++c) {
          grad[static_cast<std::size_t>(j)][c] =
              (du[static_cast<std::size_t>(j)][c] + config.input_weights[c]) * zs.span[c];
        }
      }
      rate_penalty_grad(z, eval.z_prev, zs, config, grad);
    } else {
      // Finite differences of the full objective; the rate penalty is already
      // inside eval().
      const double base = eval(z);
      const double delta = 1e-6;
      ZPlan zp = z;
      for (int j = 0; j < np; ++j) {
        for (int c = 0; c < 3; ++c) {
          zp[static_cast<std::size_t>(j)][c] += delta;
          grad[static_cast<std::size_t>(j)][c] = (eval(zp) - base) / delta;
          zp[static_cast<std::size_t>(j)][c] = z[static_cast<std::size_t>(j)][c];
        }
      }
    }
  };

  auto run_pgd = [&](ZPlan& z, double& f, int iterations, auto&& projector) {
    ZPlan velocity(static_cast<std::size_t>(np), {0.0, 0.0, 0.0});
    double step = config.solver.step_size;
    bool grad_valid = false;
    for (int it = 0; it < iterations; ++it) {
      ++total_iters;
      if (!grad_valid) {
        compute_grad(z);
        grad_valid = true;
      }
      double gmax = 0.0;
      for (const auto& g : grad) {
        for (double v : g) gmax = std::max(gmax, std::fabs(v));
      }
      if (!(gmax > 1e-18)) break;

      ZPlan z_new = z;
      for (int j = 0; j < np; ++j) {
        for (int c = 0; c < 3; ++c) {
          auto& v = velocity[static_cast<std::size_t>(j)][c];
          v = config.solver.momentum * v - step * grad[static_cast<std::size_t>(j)][c] / gmax;
          z_new[static_cast<std::size_t>(j)][c] += v;
        }
      }
      projector(z_new);
      const double f_new = eval(z_new);
      if (f_new < f) {
        z.swap(z_new);
        f = f_new;
        grad_valid = false;
      } else {
        step *= 0.5;
        for (auto& v : velocity) v = {0.0, 0.0, 0.0};
        if (config.solver.min_step > 0.0 && step < config.solver.min_step) break;
      }
    }
  };

  for (int restart = 0; restart < config.solver.restarts; ++restart) {
    ZPlan z = z_start;
    if (restart > 0) {
      Rng rng(splitmix64(config.solver.seed ^
                         (static_cast<std::uint64_t>(ctx.k0) * 0x9e3779b97f4a7c15ULL +
                          static_cast<std::uint64_t>(restart))));
      for (auto& zj : z) {
        for (int c = 0; c < 3; ++c) zj[c] += 0.2 * rng.jitter();
      }
      project(z);
    }

    // Main phase: box and mask projection, rate limits as soft penalties.
    double f = eval(z);
    run_pgd(z, f, config.solver.iterations, project);

    // Polish inside the rate-feasible set so the clamped plan is itself a
    // local optimum rather than a truncation of the penalized one.
    project_feasible(z);
    f = eval(z);
    run_pgd(z, f, std::max(8, config.solver.iterations / 4), project_feasible);

    std::vector<ControlInput> candidate(static_cast<std::size_t>(np));
    for (int j = 0; j < np; ++j) candidate[static_cast<std::size_t>(j)] = zs.to_u(z[static_cast<std::size_t>(j)]);
    enforce_plan_feasibility(candidate, ctx.u_prev, ctx.radiation_at_k0, config);
    const double f_cand = horizon_objective(candidate, predictor, ctx, config);
    if (f_cand < best.objective) {
      best.inputs = std::move(candidate);
      best.objective = f_cand;
      best.best_restart = restart;
    }
  }

  best.iterations = total_iters;
  return best;
}

std::size_t count_input_violations(const EpisodeLog& log, const MpcConfig& config) {
  std::size_t violations = 0;
  std::array<double, 3> prev = {0.0, 0.0, 0.0};
  for (std::size_t k = 0; k + 1 < log.records.size(); ++k) {
    const EpisodeRecord& rec = log.records[k];
    const bool night = rec.d.radiation < config.night_radiation;
    const auto a = rec.u.as_array();
    bool bad = false;
    for (int c = 0; c < 3; ++c) {
      if (!(a[c] >= config.input_min[c] && a[c] <= config.input_max[c])) bad = true;
      const bool masked = night && c == 0;
      if (masked) {
        if (a[c] != 0.0) bad = true;
      } else if (std::fabs(a[c] - prev[c]) > config.rate_max[c]) {
        bad = true;
      }
    }
    if (bad) ++violations;
    prev = a;
  }
  return violations;
}

ClosedLoopResult receding_horizon_control(Predictor& predictor, const DisturbanceSeries& weather,
                                          const State& x0, std::int64_t steps,
                                          const MpcConfig& config, const ModelParams& params) {
  config.validate();
  if (steps < 0) throw std::invalid_argument("receding_horizon_control: negative step count");
  if (weather.size() < static_cast<std::size_t>(steps + config.horizon)) {
    throw std::invalid_argument(
        "receding_horizon_control: weather must cover steps + horizon samples");
  }
  const double h = params.sample_interval_s;
  const auto ih = static_cast<std::int64_t>(h);

  ClosedLoopResult result;
  result.log.records.reserve(static_cast<std::size_t>(steps) + 1);

  State x = clamp_state(x0);
  Output y = measure(x, params);
  predictor.reset(x, y, weather.at(0));

  ControlInput u_prev;
  ControlPlan prev_plan;
  bool have_plan = false;

  for (std::int64_t k = 0; k < steps; ++k) {
    HorizonContext ctx;
    ctx.k0 = k;
    ctx.radiation_at_k0 = weather.at(static_cast<std::size_t>(k)).radiation;
    ctx.u_prev = u_prev;
    ctx.forecast.assign(weather.samples.begin() + static_cast<std::ptrdiff_t>(k),
                        weather.samples.begin() + static_cast<std::ptrdiff_t>(k + config.horizon));

    ControlPlan warm;
    if (have_plan) {
      warm.inputs.assign(prev_plan.inputs.begin() + 1, prev_plan.inputs.end());
      warm.inputs.push_back(prev_plan.inputs.back());
    }

    const auto t0 = std::chrono::steady_clock::now();
    ControlPlan plan = solve_horizon(predictor, ctx, config, have_plan ? &warm : nullptr);
    const double solve_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.stats.per_step_solve_s.push_back(solve_s);
    result.stats.total_solve_s += solve_s;

    ControlInput u = plan.inputs.front();
    if (config.explore_dither > 0.0) {
      Rng rng(splitmix64(config.solver.seed ^
                         (0xd17e00ULL + static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ULL)));
      auto a = u.as_array();
      for (int c = 0; c < 3; ++c) {
        a[c] += config.explore_dither * (config.input_max[c] - config.input_min[c]) * rng.jitter();
      }
      std::vector<ControlInput> scrubbed = {ControlInput::from_array(a)};
      enforce_plan_feasibility(scrubbed, u_prev, ctx.radiation_at_k0, config);
      u = scrubbed.front();
    }
    const Disturbance& d = weather.at(static_cast<std::size_t>(k));
    result.log.records.push_back({k, k * ih, d, u, x, y});

    const State x_next = rk4_step(x, u, d, params, h);
    const Output y_next = measure(x_next, params);
    predictor.observe(d, u, y, y_next, x_next);

    x = x_next;
    y = y_next;
    u_prev = u;
    prev_plan = std::move(plan);
    have_plan = true;
  }
  result.log.records.push_back(
      {steps, steps * ih, weather.at_or_last(static_cast<std::size_t>(steps)), u_prev, x, y});

  result.stats.epi_hf_m2 = epi(result.log);
  result.stats.dry_matter_g_m2 = result.log.records.back().y.dry_weight_g;
  return result;
}

}  // namespace greenhouse
