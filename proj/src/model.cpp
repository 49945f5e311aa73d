#include "greenhouse/model.hpp"

#include <cmath>
#include <stdexcept>

namespace greenhouse {

namespace {

constexpr double kSaturationGuard = 1e-12;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("non-finite input: ") + name);
  }
}

void require_finite(const State& x) {
  require_finite(x.dry_weight, "state.dry_weight");
  require_finite(x.co2, "state.co2");
  require_finite(x.temp, "state.temp");
  require_finite(x.humidity, "state.humidity");
}

void require_finite(const ControlInput& u) {
  require_finite(u.co2_injection, "input.co2_injection");
  require_finite(u.ventilation, "input.ventilation");
  require_finite(u.heating, "input.heating");
}

void require_finite(const Disturbance& d) {
  require_finite(d.radiation, "disturbance.radiation");
  require_finite(d.co2_out, "disturbance.co2_out");
  require_finite(d.temp_out, "disturbance.temp_out");
  require_finite(d.humidity_out, "disturbance.humidity_out");
}

// Temperature influence on the CO2 diffusion drive [m s^-1].
double temp_drive(double temp, const ModelParams& p) {
  return -p.phot_temp_a * temp * temp + p.phot_temp_b * temp - p.phot_temp_c;
}

double canopy_closure(double dry_weight, const ModelParams& p) {
  return 1.0 - std::exp(-p.canopy_extinction * dry_weight);
}

// Maintenance respiration drive shared by the growth and CO2 balances.
double respiration_drive(const State& x) {
  return x.dry_weight * x.dry_weight * x.temp / std::pow(10.0, 2.5);
}

}  // namespace

void ModelParams::validate() const {
  const double vals[] = {yield_factor, respiration_rate, canopy_extinction,
                         light_use_efficiency, phot_temp_a, phot_temp_b, phot_temp_c,
                         co2_compensation, co2_capacity, resp_co2_rate, leakage,
                         heat_capacity, vent_heat_coeff, heat_loss_coeff, rad_heat_gain,
                         humidity_capacity, transp_coeff, vapour_pressure_num,
                         vapour_gas_const, kelvin_offset, satvap_exp_a, satvap_exp_b,
                         gas_constant, atm_pressure_kpa, co2_molar_mass, sample_interval_s};
  for (double v : vals) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("model parameter must be strictly positive and finite");
    }
  }
}

double flux_photosynthesis(const State& x, const Disturbance& d, const ModelParams& p) {
  require_finite(x);
  require_finite(d);
  const double light = p.light_use_efficiency * d.radiation;
  const double co2_drive = temp_drive(x.temp, p) * (x.co2 - p.co2_compensation);
  const double saturation = light + co2_drive;
  if (std::fabs(saturation) < kSaturationGuard) {
    return 0.0;  // vanishing light and CO2 drive; physical flux ~ 0
  }
  return canopy_closure(x.dry_weight, p) * light * co2_drive / saturation;
}

double flux_vent_co2(const State& x, const ControlInput& u, const Disturbance& d,
                     const ModelParams& p) {
  require_finite(x);
  require_finite(u);
  require_finite(d);
  return (u.ventilation * 1e-3 + p.leakage) * (x.co2 - d.co2_out);
}

double flux_vent_h2o(const State& x, const ControlInput& u, const Disturbance& d,
                     const ModelParams& p) {
  require_finite(x);
  require_finite(u);
  require_finite(d);
  return (u.ventilation * 1e-3 + p.leakage) * (x.humidity - d.humidity_out);
}

double flux_transpiration(const State& x, const ModelParams& p) {
  require_finite(x);
  if (x.temp + p.kelvin_offset <= 0.0) {
    throw std::domain_error("flux_transpiration: temperature at or below -kelvin_offset");
  }
  if (x.temp + p.satvap_exp_b <= 0.0) {
    throw std::domain_error("flux_transpiration: singular saturation exponent denominator");
  }
  const double sat_humidity = p.vapour_pressure_num /
                              (p.vapour_gas_const * (x.temp + p.kelvin_offset)) *
                              std::exp(p.satvap_exp_a * x.temp / (x.temp + p.satvap_exp_b));
  return p.transp_coeff * canopy_closure(x.dry_weight, p) * (sat_humidity - x.humidity);
}

StateRate derivatives(const State& x, const ControlInput& u, const Disturbance& d,
                      const ModelParams& p) {
  require_finite(x);
  require_finite(u);
  require_finite(d);
  const double phot = flux_photosynthesis(x, d, p);
  const double resp = respiration_drive(x);

  StateRate rate;
  rate.dry_weight = p.yield_factor * phot - p.respiration_rate * resp;
  // u enters in mg; the balance runs in kg.
  rate.co2 = (-phot + p.resp_co2_rate * resp + u.co2_injection * 1e-6 -
              flux_vent_co2(x, u, d, p)) /
             p.co2_capacity;
  rate.temp = (u.heating -
               (p.vent_heat_coeff * u.ventilation * 1e-3 + p.heat_loss_coeff) *
                   (x.temp - d.temp_out) +
               p.rad_heat_gain * d.radiation) /
              p.heat_capacity;
  rate.humidity = (flux_transpiration(x, p) - flux_vent_h2o(x, u, d, p)) / p.humidity_capacity;
  return rate;
}

State clamp_state(State x) {
  if (x.dry_weight < 0.0) x.dry_weight = 0.0;
  if (x.co2 < 0.0) x.co2 = 0.0;
  if (x.humidity < 0.0) x.humidity = 0.0;
  return x;
}

bool input_in_bounds(const ControlInput& u) {
  const auto a = u.as_array();
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(a[i] >= kInputMin[i] && a[i] <= kInputMax[i])) return false;
  }
  return true;
}

State rk4_step(const State& x, const ControlInput& u, const Disturbance& d,
               const ModelParams& p, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("rk4_step: step size must be positive");
  }
  const char* stage_names[] = {"k1", "k2", "k3", "k4"};
  std::array<std::array<double, 4>, 4> k{};
  const std::array<double, 4> x0 = x.as_array();

  for (int stage = 0; stage < 4; ++stage) {
    std::array<double, 4> xs = x0;
    if (stage == 1 || stage == 2) {
      for (int i = 0; i < 4; ++i) xs[i] += 0.5 * h * k[stage - 1][i];
    } else if (stage == 3) {
      for (int i = 0; i < 4; ++i) xs[i] += h * k[2][i];
    }
    const StateRate r = derivatives(State::from_array(xs), u, d, p);
    k[stage] = r.as_array();
    for (int i = 0; i < 4; ++i) {
      if (!std::isfinite(k[stage][i])) {
        throw std::runtime_error(std::string("rk4_step: non-finite derivative at stage ") +
                                 stage_names[stage]);
      }
    }
  }

  std::array<double, 4> next = x0;
  for (int i = 0; i < 4; ++i) {
    next[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
  }
  return clamp_state(State::from_array(next));
}

Output measure(const State& x, const ModelParams& p) {
  require_finite(x);
  if (x.temp + p.kelvin_offset <= 0.0) {
    throw std::domain_error("measure: temperature at or below absolute zero");
  }
  Output y;
  y.dry_weight_g = 1e3 * x.dry_weight;
  y.co2_ppm = 1e3 * p.gas_constant * (x.temp + p.kelvin_offset) /
              (p.atm_pressure_kpa * p.co2_molar_mass) * x.co2;
  y.temp_c = x.temp;
  // Vapour pressure over Magnus-form saturation pressure, in percent.
  y.rel_humidity = 1e2 * p.gas_constant * (x.temp + p.kelvin_offset) /
                   (11.0 * std::exp(p.satvap_exp_a * x.temp / (x.temp + p.satvap_exp_b))) *
                   x.humidity;
  return y;
}

}  // namespace greenhouse
