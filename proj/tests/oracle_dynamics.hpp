// Test-only straight-line transcription of the greenhouse model equations,
// written directly against the published formulas with literal coefficients.
// Deliberately independent of the library implementation: any structural or
// parameter mistake on either side shows up as a mismatch.
#pragma once

#include <array>
#include <cmath>

namespace oracle {

inline double photosynthesis(double x1, double x2, double x3, double d1) {
  const double light = 3.55e-9 * d1;
  const double drive = (-5.11e-6 * x3 * x3 + 2.3e-4 * x3 - 6.29e-4) * (x2 - 5.2e-5);
  const double saturation = light + drive;
  if (std::fabs(saturation) < 1e-12) return 0.0;
  return (1.0 - std::exp(-53.0 * x1)) * light * drive / saturation;
}

inline double vent_co2(double x2, double u2, double d2) {
  return (u2 * 1e-3 + 7.5e-6) * (x2 - d2);
}

inline double vent_h2o(double x4, double u2, double d4) {
  return (u2 * 1e-3 + 7.5e-6) * (x4 - d4);
}

inline double transpiration(double x1, double x3, double x4) {
  return 0.0036 * (1.0 - std::exp(-53.0 * x1)) *
         (9348.0 / (8314.0 * (x3 + 273.15)) * std::exp(17.4 * x3 / (x3 + 239.0)) - x4);
}

inline std::array<double, 4> rates(const std::array<double, 4>& x, const std::array<double, 3>& u,
                                   const std::array<double, 4>& d) {
  const double phot = photosynthesis(x[0], x[1], x[2], d[0]);
  const double resp = x[0] * x[0] * x[2] / std::pow(10.0, 2.5);
  std::array<double, 4> r{};
  r[0] = 0.544 * phot - 2.65e-7 * resp;
  r[1] = (-phot + 4.87e-7 * resp + u[0] * 1e-6 - vent_co2(x[1], u[1], d[1])) / 4.1;
  r[2] = (u[2] - (1290.0 * u[1] * 1e-3 + 6.1) * (x[2] - d[2]) + 0.2 * d[0]) / 3.0e4;
  r[3] = (transpiration(x[0], x[2], x[3]) - vent_h2o(x[3], u[1], d[3])) / 4.1;
  return r;
}

inline std::array<double, 4> outputs(const std::array<double, 4>& x) {
  std::array<double, 4> y{};
  y[0] = 1e3 * x[0];
  y[1] = 1e3 * 8.314 * (x[2] + 273.15) / (101.325 * 0.044) * x[1];
  y[2] = x[2];
  y[3] = 1e2 * 8.314 * (x[2] + 273.15) / (11.0 * std::exp(17.4 * x[2] / (x[2] + 239.0))) * x[3];
  return y;
}

// Ideal-gas route for the ppm output, SI units throughout.
inline double co2_ppm_ideal_gas(double co2_kg_m3, double temp_c) {
  const double gas_r = 8.314;      // J mol^-1 K^-1
  const double pressure = 101325;  // Pa
  const double molar_mass = 0.044; // kg mol^-1
  return co2_kg_m3 * gas_r * (temp_c + 273.15) / (pressure * molar_mass) * 1e6;
}

}  // namespace oracle
