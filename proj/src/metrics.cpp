#include "greenhouse/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace greenhouse {

double epi(const EpisodeLog& log, const PriceBook& prices) {
  if (log.records.empty()) throw std::invalid_argument("epi: empty episode log");
  const double h = static_cast<double>(log.records.size() > 1
                                           ? log.records[1].t_s - log.records[0].t_s
                                           : 900);
  double cost = 0.0;
  for (std::size_t k = 0; k + 1 < log.records.size(); ++k) {
    const ControlInput& u = log.records[k].u;
    const double co2_kg_per_s = u.co2_injection * 1e-6;  // actuator unit is mg
    cost += (prices.heat_cost * u.heating + prices.co2_cost * co2_kg_per_s) * h;
  }
  const double yield_kg = log.records.back().y.dry_weight_g * 1e-3;
  return prices.crop_base + prices.crop_rate * yield_kg - cost;
}

ThermalReport thermal_violations(const EpisodeLog& log) {
  ThermalReport rep;
  rep.n_steps = log.steps();
  double day_sum = 0.0, night_sum = 0.0;
  std::size_t day_count = 0, night_count = 0;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const EpisodeRecord& r = log.records[i];
    if (r.d.radiation < kNightRadiation) {
      if (r.y.temp_c < 10.0) {
        night_sum += 10.0 - r.y.temp_c;
        ++night_count;
      }
    } else if (r.y.temp_c < 15.0) {
      day_sum += 15.0 - r.y.temp_c;
      ++day_count;
    }
  }
  rep.count = day_count + night_count;
  if (rep.n_steps > 0) {
    rep.rate_pct = static_cast<double>(rep.count) / static_cast<double>(rep.n_steps) * 100.0;
  }
  rep.mean_day_c = day_count > 0 ? day_sum / static_cast<double>(day_count) : 0.0;
  rep.mean_night_c = night_count > 0 ? night_sum / static_cast<double>(night_count) : 0.0;
  return rep;
}

HumidityReport humidity_violations(const EpisodeLog& log) {
  HumidityReport rep;
  rep.n_steps = log.steps();
  double sum = 0.0;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const double rh = log.records[i].y.rel_humidity;
    if (rh > 85.0) {
      sum += rh - 85.0;
      ++rep.count;
    }
  }
  if (rep.n_steps > 0) {
    rep.rate_pct = static_cast<double>(rep.count) / static_cast<double>(rep.n_steps) * 100.0;
  }
  rep.mean_excess_pct = rep.count > 0 ? sum / static_cast<double>(rep.count) : 0.0;
  return rep;
}

namespace {

std::string two_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string report_csv(const std::vector<RunResult>& runs, const PriceBook& prices) {
  if (runs.empty()) throw std::invalid_argument("report_csv: no runs");
  std::string out(kReportCsvHeader);
  out.push_back('\n');
  for (const RunResult& run : runs) {
    const ThermalReport t = thermal_violations(run.log);
    const HumidityReport hu = humidity_violations(run.log);
    const double value = epi(run.log, prices);
    out += run.label;
    out.push_back(',');
    out += two_decimals(t.rate_pct);
    out.push_back(',');
    out += two_decimals(t.mean_day_c);
    out.push_back(',');
    out += two_decimals(t.mean_night_c);
    out.push_back(',');
    out += two_decimals(hu.rate_pct);
    out.push_back(',');
    out += two_decimals(hu.mean_excess_pct);
    out.push_back(',');
    out += two_decimals(value);
    out.push_back(',');
    out += two_decimals(run.log.records.back().y.dry_weight_g);
    out.push_back(',');
    out += two_decimals(run.stats.total_solve_s);
    out.push_back('\n');
  }
  return out;
}

void write_report_csv(const std::vector<RunResult>& runs, const std::string& path,
                      const PriceBook& prices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << report_csv(runs, prices);
}

}  // namespace greenhouse
