#include "greenhouse/episode.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "greenhouse/textio.hpp"

namespace greenhouse {

EpisodeLog simulate_episode(const State& x0, const ControlPolicy& policy,
                            const DisturbanceSeries& weather, std::int64_t steps,
                            const ModelParams& params) {
  if (steps < 0) throw std::invalid_argument("simulate_episode: negative step count");
  if (weather.size() < static_cast<std::size_t>(steps)) {
    throw std::invalid_argument("simulate_episode: weather series shorter than requested steps");
  }
  const double h = params.sample_interval_s;
  const auto ih = static_cast<std::int64_t>(h);

  EpisodeLog log;
  log.records.reserve(static_cast<std::size_t>(steps) + 1);

  State x = clamp_state(x0);
  ControlInput last_u;
  for (std::int64_t k = 0; k < steps; ++k) {
    const Disturbance& d = weather.at(static_cast<std::size_t>(k));
    const Output y = measure(x, params);
    const ControlInput u = policy(k, x, y, d);
    if (!input_in_bounds(u)) {
      throw std::runtime_error("simulate_episode: policy returned out-of-bounds input at step " +
                               format_int(k));
    }
    log.records.push_back({k, k * ih, d, u, x, y});
    x = rk4_step(x, u, d, params, h);
    last_u = u;
  }
  const Disturbance& d_end = weather.at_or_last(static_cast<std::size_t>(steps));
  log.records.push_back({steps, steps * ih, d_end, last_u, x, measure(x, params)});
  return log;
}

std::string episode_csv_string(const EpisodeLog& log) {
  std::string out;
  out += "# seed=" + format_int(static_cast<std::int64_t>(log.seed)) + "\n";
  out += "# scenario=" + log.scenario_id + "\n";
  out += "# controller=" + log.controller_id + "\n";
  out += kEpisodeCsvHeader;
  out.push_back('\n');
  for (const EpisodeRecord& r : log.records) {
    out += format_int(r.k);
    out.push_back(',');
    out += format_int(r.t_s);
    for (double v : r.d.as_array()) {
      out.push_back(',');
      out += format_double(v);
    }
    for (double v : r.u.as_array()) {
      out.push_back(',');
      out += format_double(v);
    }
    for (double v : r.x.as_array()) {
      out.push_back(',');
      out += format_double(v);
    }
    for (double v : r.y.as_array()) {
      out.push_back(',');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

void write_episode_csv(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << episode_csv_string(log);
}

EpisodeLog parse_episode_csv(const std::string& text, const std::string& origin) {
  EpisodeLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = origin + ":" + format_int(static_cast<std::int64_t>(line_no));
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      std::string value = line.substr(eq + 1);
      while (!key.empty() && key.front() == ' ') key.erase(key.begin());
      if (key == "seed") {
        log.seed = static_cast<std::uint64_t>(parse_int(value, ctx));
      } else if (key == "scenario") {
        log.scenario_id = value;
      } else if (key == "controller") {
        log.controller_id = value;
      }
      continue;
    }
    if (!header_seen) {
      if (line != kEpisodeCsvHeader) {
        throw std::runtime_error(ctx + ": bad header, expected '" +
                                 std::string(kEpisodeCsvHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != 17) {
      throw std::runtime_error(ctx + ": expected 17 columns, got " +
                               format_int(static_cast<std::int64_t>(fields.size())));
    }
    EpisodeRecord r;
    r.k = parse_int(fields[0], ctx);
    r.t_s = parse_int(fields[1], ctx);
    std::array<double, 15> v{};
    for (std::size_t i = 0; i < 15; ++i) v[i] = parse_double(fields[i + 2], ctx);
    r.d = Disturbance::from_array({v[0], v[1], v[2], v[3]});
    r.u = ControlInput::from_array({v[4], v[5], v[6]});
    r.x = State::from_array({v[7], v[8], v[9], v[10]});
    r.y = Output::from_array({v[11], v[12], v[13], v[14]});
    log.records.push_back(r);
  }
  if (!header_seen) throw std::runtime_error(origin + ": missing header");
  return log;
}

EpisodeLog load_episode_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_episode_csv(buf.str(), path);
}

void validate_episode(const EpisodeLog& log, const ModelParams& params) {
  if (log.records.empty()) throw std::runtime_error("episode log is empty");
  const auto ih = static_cast<std::int64_t>(params.sample_interval_s);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const EpisodeRecord& r = log.records[i];
    const std::string ctx = "record " + format_int(static_cast<std::int64_t>(i));
    if (r.k != static_cast<std::int64_t>(i)) {
      throw std::runtime_error(ctx + ": step index not contiguous");
    }
    if (r.t_s != r.k * ih) throw std::runtime_error(ctx + ": time not on the sampling grid");
    for (double v : r.d.as_array()) {
      if (!std::isfinite(v)) throw std::runtime_error(ctx + ": non-finite disturbance");
    }
    for (double v : r.x.as_array()) {
      if (!std::isfinite(v)) throw std::runtime_error(ctx + ": non-finite state");
    }
    if (r.x.dry_weight < 0.0 || r.x.co2 < 0.0 || r.x.humidity < 0.0) {
      throw std::runtime_error(ctx + ": negative mass state");
    }
    const Output expect = measure(r.x, params);
    if (expect.as_array() != r.y.as_array()) {
      throw std::runtime_error(ctx + ": output does not match measure(state)");
    }
  }
}

}  // namespace greenhouse
