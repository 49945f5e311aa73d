#pragma once

#include <string>
#include <vector>

#include "greenhouse/episode.hpp"

namespace greenhouse {

// Operating cost and crop pricing coefficients [Hf = guilder-style unit].
struct PriceBook {
  double co2_cost = 42e-2;    // CO2 enrichment [Hf kg^-1]
  double heat_cost = 6.35e-9; // heating energy [Hf J^-1]
  double crop_base = 1.8;     // fixed crop revenue [Hf m^-2]
  double crop_rate = 16.0;    // dry-matter revenue [Hf kg^-1]
};

// Net profit per square metre: crop revenue minus heating and CO2 costs over
// all controlled intervals.
double epi(const EpisodeLog& log, const PriceBook& prices = PriceBook{});

// Radiation threshold separating day and night constraint regimes [W m^-2].
inline constexpr double kNightRadiation = 10.0;

struct ThermalReport {
  std::size_t count = 0;      // steps below the active temperature floor
  double rate_pct = 0.0;
  double mean_day_c = 0.0;    // mean shortfall below 15 degC, violating day steps
  double mean_night_c = 0.0;  // mean shortfall below 10 degC, violating night steps
  std::size_t n_steps = 0;
};

struct HumidityReport {
  std::size_t count = 0;      // steps above 85 % relative humidity
  double rate_pct = 0.0;
  double mean_excess_pct = 0.0;
  std::size_t n_steps = 0;
};

// Violations are evaluated on the post-control records 1..N, each against its
// own radiation regime.
ThermalReport thermal_violations(const EpisodeLog& log);
HumidityReport humidity_violations(const EpisodeLog& log);

// Closed-loop accounting attached to a run.
struct ControlStats {
  double total_solve_s = 0.0;
  std::vector<double> per_step_solve_s;
  double epi_hf_m2 = 0.0;
  double dry_matter_g_m2 = 0.0;
};

struct RunResult {
  std::string label;
  EpisodeLog log;
  ControlStats stats;
};

inline constexpr const char* kReportCsvHeader =
    "label,temp_viol_pct,day_temp_mag_c,night_temp_mag_c,hum_viol_pct,hum_mean_pct,"
    "epi_hf_m2,dry_matter_g_m2,proc_time_s";

// One row per run, two decimals, fixed column order.
std::string report_csv(const std::vector<RunResult>& runs, const PriceBook& prices = PriceBook{});
void write_report_csv(const std::vector<RunResult>& runs, const std::string& path,
                      const PriceBook& prices = PriceBook{});

}  // namespace greenhouse
