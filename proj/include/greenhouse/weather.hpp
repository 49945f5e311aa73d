#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "greenhouse/model.hpp"

namespace greenhouse {

// Regularly sampled outdoor weather. Everything downstream runs on a 900 s
// grid; resample() brings arbitrary source intervals onto it.
struct DisturbanceSeries {
  std::int64_t start_epoch_s = 0;
  std::int64_t interval_s = 900;
  std::vector<Disturbance> samples;

  std::size_t size() const { return samples.size(); }
  const Disturbance& at(std::size_t i) const { return samples.at(i); }

  // Sample index i, holding the last value past the end.
  const Disturbance& at_or_last(std::size_t i) const {
    return samples.at(i < samples.size() ? i : samples.size() - 1);
  }
};

// Synthetic weather scenario: one statistically stationary day pattern,
// repeated with bounded noise. Stands in for recorded weather files.
struct WeatherProfile {
  double rad_peak = 650.0;      // clear-sky noon radiation [W m^-2]
  double day_start_h = 6.0;     // sunrise hour
  double day_length_h = 12.0;   // daylight duration [h]
  double temp_mean = 14.0;      // [deg C]
  double temp_amp = 7.0;        // diurnal half-range [deg C]
  double temp_peak_h = 15.0;    // warmest hour (lags solar noon)
  double co2_mean = 7.2e-4;     // outdoor CO2 [kg m^-3]
  double rh_mean = 0.75;        // outdoor relative humidity fraction
  double noise = 0.15;          // 0 disables all jitter
  std::uint64_t seed = 1;
};

// CSV schema: timestamp_s,rad_w_m2,temp_c,co2_kg_m3,hum_kg_m3
inline constexpr const char* kWeatherCsvHeader =
    "timestamp_s,rad_w_m2,temp_c,co2_kg_m3,hum_kg_m3";

DisturbanceSeries load_weather_csv(const std::string& path);
void write_weather_csv(const DisturbanceSeries& series, const std::string& path);
std::string weather_csv_string(const DisturbanceSeries& series);
DisturbanceSeries parse_weather_csv(const std::string& text, const std::string& origin);

// Linear per-channel interpolation onto target_interval_s; endpoints are kept
// and radiation is clamped at zero.
DisturbanceSeries resample(const DisturbanceSeries& series, std::int64_t target_interval_s = 900);

// days * 96 samples at 900 s starting at midnight; deterministic in the seed.
DisturbanceSeries synth_weather(const WeatherProfile& profile, int days);

// Whole-episode split, deterministic order, no shuffling.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& episodes,
                                                           double ratio = 0.8) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("split_train_test: ratio must lie in (0, 1)");
  }
  if (episodes.size() < 2) {
    throw std::invalid_argument("split_train_test: need at least 2 episodes");
  }
  const auto n = episodes.size();
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  if (n_train < 1) n_train = 1;
  if (n_train > n - 1) n_train = n - 1;
  std::vector<T> train(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<T> test(episodes.begin() + static_cast<std::ptrdiff_t>(n_train), episodes.end());
  return {std::move(train), std::move(test)};
}

}  // namespace greenhouse
