#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "greenhouse/model.hpp"
#include "greenhouse/weather.hpp"

namespace greenhouse {

// One 900 s step of a closed-loop run. For the terminal record u repeats the
// last applied input and is never consumed downstream.
struct EpisodeRecord {
  std::int64_t k = 0;   // step index
  std::int64_t t_s = 0; // seconds since episode start
  Disturbance d;
  ControlInput u;
  State x;
  Output y;

  bool operator==(const EpisodeRecord&) const = default;
};

// Time-indexed record of a whole run; the exchange format between simulation,
// training and metrics. records.size() == control steps + 1.
struct EpisodeLog {
  std::vector<EpisodeRecord> records;
  std::uint64_t seed = 0;
  std::string scenario_id;
  std::string controller_id;

  std::size_t size() const { return records.size(); }
  // Number of controlled intervals.
  std::size_t steps() const { return records.empty() ? 0 : records.size() - 1; }

  bool operator==(const EpisodeLog&) const = default;
};

using ControlPolicy = std::function<ControlInput(std::int64_t k, const State& x, const Output& y,
                                                 const Disturbance& d)>;

// Closed-loop rollout at the fixed sampling interval. The policy must return
// in-bounds inputs; out-of-bounds values are treated as a bug and rejected.
EpisodeLog simulate_episode(const State& x0, const ControlPolicy& policy,
                            const DisturbanceSeries& weather, std::int64_t steps,
                            const ModelParams& params = ModelParams{});

// CSV schema: k,t_s,d1,d2,d3,d4,u1,u2,u3,x1,x2,x3,x4,y1,y2,y3,y4 with leading
// '# key=value' metadata lines.
inline constexpr const char* kEpisodeCsvHeader =
    "k,t_s,d1,d2,d3,d4,u1,u2,u3,x1,x2,x3,x4,y1,y2,y3,y4";

std::string episode_csv_string(const EpisodeLog& log);
void write_episode_csv(const EpisodeLog& log, const std::string& path);
EpisodeLog parse_episode_csv(const std::string& text, const std::string& origin);
EpisodeLog load_episode_csv(const std::string& path);

// Throws std::runtime_error describing the first violated log invariant
// (indexing, spacing, measurement consistency, non-finite values).
void validate_episode(const EpisodeLog& log, const ModelParams& params = ModelParams{});

}  // namespace greenhouse
