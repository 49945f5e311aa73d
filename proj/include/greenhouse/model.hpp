#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace greenhouse {

// Physical state of the lettuce greenhouse.
struct State {
  double dry_weight = 0.0;  // crop dry weight [kg m^-2]
  double co2 = 0.0;         // indoor CO2 concentration [kg m^-3]
  double temp = 0.0;        // indoor air temperature [deg C]
  double humidity = 0.0;    // indoor absolute humidity [kg m^-3]

  std::array<double, 4> as_array() const { return {dry_weight, co2, temp, humidity}; }
  static State from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  bool operator==(const State&) const = default;
};

// Actuator command, held constant over one control interval.
struct ControlInput {
  double co2_injection = 0.0;  // [mg m^-2 s^-1]
  double ventilation = 0.0;    // [mm s^-1]
  double heating = 0.0;        // [W m^-2]

  std::array<double, 3> as_array() const { return {co2_injection, ventilation, heating}; }
  static ControlInput from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
  bool operator==(const ControlInput&) const = default;
};

// Actuator box bounds.
inline constexpr std::array<double, 3> kInputMin = {0.0, 0.0, 0.0};
inline constexpr std::array<double, 3> kInputMax = {1.2, 7.5, 150.0};

// Outdoor weather acting on the greenhouse.
struct Disturbance {
  double radiation = 0.0;     // incoming solar radiation [W m^-2]
  double co2_out = 0.0;       // outdoor CO2 concentration [kg m^-3]
  double temp_out = 0.0;      // outdoor temperature [deg C]
  double humidity_out = 0.0;  // outdoor absolute humidity [kg m^-3]

  std::array<double, 4> as_array() const { return {radiation, co2_out, temp_out, humidity_out}; }
  static Disturbance from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  bool operator==(const Disturbance&) const = default;
};

// Sensor reading derived from the state.
struct Output {
  double dry_weight_g = 0.0;  // measured dry weight [g m^-2]
  double co2_ppm = 0.0;       // indoor CO2 [ppm]
  double temp_c = 0.0;        // indoor temperature [deg C]
  double rel_humidity = 0.0;  // relative humidity [%]

  std::array<double, 4> as_array() const { return {dry_weight_g, co2_ppm, temp_c, rel_humidity}; }
  static Output from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  bool operator==(const Output&) const = default;
};

// Time derivative of the state, per second.
struct StateRate {
  double dry_weight = 0.0;
  double co2 = 0.0;
  double temp = 0.0;
  double humidity = 0.0;

  std::array<double, 4> as_array() const { return {dry_weight, co2, temp, humidity}; }
};

// Model coefficients. Defaults reproduce the published lettuce-greenhouse
// parameter set; the output-map constants are standard physical values.
struct ModelParams {
  // Crop growth / photosynthesis
  double yield_factor = 0.544;           // CO2 assimilate to dry-weight conversion [-]
  double respiration_rate = 2.65e-7;     // maintenance respiration coefficient [s^-1]
  double canopy_extinction = 53.0;       // effective canopy absorption [m^2 kg^-1]
  double light_use_efficiency = 3.55e-9; // [kg J^-1]
  double phot_temp_a = 5.11e-6;          // temperature influence, quadratic [m s^-1 degC^-2]
  double phot_temp_b = 2.3e-4;           // temperature influence, linear [m s^-1 degC^-1]
  double phot_temp_c = 6.29e-4;          // temperature influence, constant [m s^-1]
  double co2_compensation = 5.2e-5;      // CO2 compensation point [kg m^-3]

  // Indoor CO2 balance
  double co2_capacity = 4.1;             // volumetric air capacity [m]
  double resp_co2_rate = 4.87e-7;        // respiration CO2 release coefficient [s^-1]
  double leakage = 7.5e-6;               // envelope leakage air exchange [m s^-1]

  // Energy balance
  double heat_capacity = 3.0e4;          // [J m^-2 degC^-1]
  double vent_heat_coeff = 1290.0;       // heat removed per unit ventilation [J m^-3 degC^-1]
  double heat_loss_coeff = 6.1;          // envelope heat transfer [W m^-2 degC^-1]
  double rad_heat_gain = 0.2;            // solar heat load fraction [-]

  // Humidity balance / transpiration
  double humidity_capacity = 4.1;        // volumetric air capacity [m]
  double transp_coeff = 3.6e-3;          // canopy transpiration mass transfer [m s^-1]
  double vapour_pressure_num = 9348.0;   // saturation vapour scaling, numerator [J m^-3]
  double vapour_gas_const = 8314.0;      // saturation vapour scaling, denominator [J kmol^-1 degC^-1]
  double kelvin_offset = 273.15;         // [K]
  double satvap_exp_a = 17.4;            // saturation vapour exponent [-]
  double satvap_exp_b = 239.0;           // saturation vapour exponent offset [degC]

  // Output map
  double gas_constant = 8.314;           // [J mol^-1 K^-1]
  double atm_pressure_kpa = 101.325;     // [kPa]
  double co2_molar_mass = 0.044;         // [kg mol^-1]

  double sample_interval_s = 900.0;      // control/integration interval [s]

  // Throws std::invalid_argument if any coefficient is non-positive.
  void validate() const;
};

// Gross canopy photosynthesis rate [kg m^-2 s^-1]. Returns 0 when the
// light/CO2 drive vanishes (guarded saturation denominator).
double flux_photosynthesis(const State& x, const Disturbance& d, const ModelParams& p);

// CO2 exchange through ventilation and leakage [kg m^-2 s^-1].
double flux_vent_co2(const State& x, const ControlInput& u, const Disturbance& d,
                     const ModelParams& p);

// H2O exchange through ventilation and leakage [kg m^-2 s^-1].
double flux_vent_h2o(const State& x, const ControlInput& u, const Disturbance& d,
                     const ModelParams& p);

// Canopy transpiration rate [kg m^-2 s^-1].
double flux_transpiration(const State& x, const ModelParams& p);

// Right-hand side of the continuous-time model.
StateRate derivatives(const State& x, const ControlInput& u, const Disturbance& d,
                      const ModelParams& p);

// One classical fourth-order Runge-Kutta step of length h seconds with u and d
// held constant. Non-negative states are clamped at zero after the update.
State rk4_step(const State& x, const ControlInput& u, const Disturbance& d,
               const ModelParams& p, double h);

// Measurement map: dry weight in g, CO2 in ppm, temperature as-is, relative
// humidity in percent.
Output measure(const State& x, const ModelParams& p);

// Clamp dry weight, CO2 and humidity at zero; temperature is left untouched.
State clamp_state(State x);

// True when every component of u lies inside the actuator box bounds.
bool input_in_bounds(const ControlInput& u);

}  // namespace greenhouse
