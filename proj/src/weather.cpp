#include "greenhouse/weather.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "greenhouse/rng.hpp"
#include "greenhouse/textio.hpp"

namespace greenhouse {

namespace {

// Saturation absolute humidity of outdoor air [kg m^-3], Magnus form.
double saturation_humidity(double temp_c) {
  const double p_sat = 610.78 * std::exp(17.27 * temp_c / (temp_c + 238.3));  // [Pa]
  return p_sat * 0.018015 / (8.314 * (temp_c + 273.15));
}

void validate_sample(const Disturbance& d, const std::string& context) {
  const auto a = d.as_array();
  for (double v : a) {
    if (!std::isfinite(v)) throw std::runtime_error(context + ": non-finite value");
  }
  if (d.radiation < 0.0 || d.co2_out < 0.0 || d.humidity_out < 0.0) {
    throw std::runtime_error(context + ": negative radiation, CO2 or humidity");
  }
}

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

DisturbanceSeries parse_weather_csv(const std::string& text, const std::string& origin) {
  DisturbanceSeries series;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) {
    throw std::runtime_error(origin + ": empty file");
  }
  ++line_no;
  if (line != kWeatherCsvHeader) {
    throw std::runtime_error(origin + ":1: bad header, expected '" +
                             std::string(kWeatherCsvHeader) + "'");
  }

  std::int64_t prev_ts = 0;
  std::int64_t interval = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = origin + ":" + format_int(static_cast<std::int64_t>(line_no));
    const auto fields = split_fields(line);
    if (fields.size() != 5) {
      throw std::runtime_error(ctx + ": expected 5 columns, got " +
                               format_int(static_cast<std::int64_t>(fields.size())));
    }
    const std::int64_t ts = parse_int(fields[0], ctx);
    Disturbance d;
    d.radiation = parse_double(fields[1], ctx);
    d.temp_out = parse_double(fields[2], ctx);
    d.co2_out = parse_double(fields[3], ctx);
    d.humidity_out = parse_double(fields[4], ctx);
    validate_sample(d, ctx);

    if (series.samples.empty()) {
      series.start_epoch_s = ts;
    } else {
      if (ts <= prev_ts) {
        throw std::runtime_error(ctx + ": timestamp not strictly increasing");
      }
      if (series.samples.size() == 1) {
        interval = ts - prev_ts;
      } else if (ts - prev_ts != interval) {
        throw std::runtime_error(ctx + ": irregular timestamp spacing");
      }
    }
    prev_ts = ts;
    series.samples.push_back(d);
  }
  if (interval > 0) series.interval_s = interval;
  return series;
}

DisturbanceSeries load_weather_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_weather_csv(buf.str(), path);
}

std::string weather_csv_string(const DisturbanceSeries& series) {
  std::string out(kWeatherCsvHeader);
  out.push_back('\n');
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const Disturbance& d = series.samples[i];
    out += format_int(series.start_epoch_s + static_cast<std::int64_t>(i) * series.interval_s);
    out.push_back(',');
    out += format_double(d.radiation);
    out.push_back(',');
    out += format_double(d.temp_out);
    out.push_back(',');
    out += format_double(d.co2_out);
    out.push_back(',');
    out += format_double(d.humidity_out);
    out.push_back('\n');
  }
  return out;
}

void write_weather_csv(const DisturbanceSeries& series, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << weather_csv_string(series);
}

DisturbanceSeries resample(const DisturbanceSeries& series, std::int64_t target_interval_s) {
  if (series.samples.size() < 2) {
    throw std::invalid_argument("resample: need at least 2 samples");
  }
  if (!(target_interval_s > 0)) {
    throw std::invalid_argument("resample: target interval must be positive");
  }
  if (series.interval_s == target_interval_s) return series;

  const auto n = series.samples.size();
  const double span = static_cast<double>(n - 1) * static_cast<double>(series.interval_s);
  const auto n_out =
      static_cast<std::size_t>(std::floor(span / static_cast<double>(target_interval_s))) + 1;

  DisturbanceSeries out;
  out.start_epoch_s = series.start_epoch_s;
  out.interval_s = target_interval_s;
  out.samples.reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(target_interval_s) /
                       static_cast<double>(series.interval_s);
    auto j = static_cast<std::size_t>(std::floor(pos));
    if (j >= n - 1) j = n - 2;
    const double frac = pos - static_cast<double>(j);
    const auto a = series.samples[j].as_array();
    const auto b = series.samples[j + 1].as_array();
    std::array<double, 4> mixed{};
    for (int c = 0; c < 4; ++c) mixed[c] = a[c] + frac * (b[c] - a[c]);
    Disturbance d = Disturbance::from_array(mixed);
    if (d.radiation < 0.0) d.radiation = 0.0;
    out.samples.push_back(d);
  }
  return out;
}

DisturbanceSeries synth_weather(const WeatherProfile& profile, int days) {
  if (days < 1) throw std::invalid_argument("synth_weather: days must be >= 1");
  Rng rng(profile.seed);
  DisturbanceSeries series;
  series.start_epoch_s = 0;
  series.interval_s = 900;
  const int n = days * 96;
  series.samples.reserve(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const double hour = std::fmod(static_cast<double>(i) * 0.25, 24.0);
    const double j_rad = rng.jitter();
    const double j_temp = rng.jitter();
    const double j_co2 = rng.jitter();
    const double j_rh = rng.jitter();

    Disturbance d;
    const double day_frac = (hour - profile.day_start_h) / profile.day_length_h;
    if (day_frac > 0.0 && day_frac < 1.0) {
      const double base = profile.rad_peak * std::sin(M_PI * day_frac);
      d.radiation = clamp(base * (1.0 + profile.noise * j_rad), 0.0, profile.rad_peak);
    } else {
      d.radiation = 0.0;
    }
    d.temp_out = profile.temp_mean +
                 profile.temp_amp * std::cos(2.0 * M_PI * (hour - profile.temp_peak_h) / 24.0) +
                 profile.noise * 2.0 * j_temp;
    d.co2_out = std::max(0.0, profile.co2_mean * (1.0 + 0.05 * profile.noise * j_co2));
    // Afternoon air is relatively drier; absolute humidity follows temperature.
    const double rh = clamp(profile.rh_mean -
                                0.08 * std::cos(2.0 * M_PI * (hour - profile.temp_peak_h) / 24.0) +
                                0.05 * profile.noise * j_rh,
                            0.2, 0.98);
    d.humidity_out = rh * saturation_humidity(d.temp_out);
    series.samples.push_back(d);
  }
  return series;
}

}  // namespace greenhouse
