#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "greenhouse/episode.hpp"
#include "greenhouse/weather.hpp"

using namespace greenhouse;

namespace {

const State kX0{0.0035, 0.001, 15.0, 0.008};

ControlInput mild_policy(std::int64_t, const State&, const Output&, const Disturbance& d) {
  ControlInput u;
  u.ventilation = 1.0;
  u.heating = d.temp_out < 10.0 ? 50.0 : 0.0;
  return u;
}

}  // namespace

TEST_CASE("simulate_episode basics") {
  const DisturbanceSeries weather = synth_weather(WeatherProfile{.seed = 11}, 2);

  SUBCASE("one step yields the initial record plus one") {
    const EpisodeLog log = simulate_episode(kX0, mild_policy, weather, 1);
    CHECK(log.size() == 2);
    CHECK(log.steps() == 1);
    CHECK(log.records[0].k == 0);
    CHECK(log.records[1].t_s == 900);
  }
  SUBCASE("log satisfies the structural invariants") {
    const EpisodeLog log = simulate_episode(kX0, mild_policy, weather, 96);
    CHECK_NOTHROW(validate_episode(log));
    CHECK(log.size() == 97);
  }
  SUBCASE("identical runs are bit-identical") {
    const EpisodeLog a = simulate_episode(kX0, mild_policy, weather, 50);
    const EpisodeLog b = simulate_episode(kX0, mild_policy, weather, 50);
    CHECK(a == b);
  }
  SUBCASE("crop grows under light when photosynthesis dominates") {
    const EpisodeLog log = simulate_episode(kX0, mild_policy, weather, 96);
    for (std::size_t i = 1; i < log.size(); ++i) {
      if (log.records[i - 1].d.radiation > 0.0) {
        CHECK(log.records[i].x.dry_weight >= log.records[i - 1].x.dry_weight);
      }
    }
    CHECK(log.records.back().x.dry_weight > kX0.dry_weight);
  }
  SUBCASE("out-of-bounds policy is a bug, not clamped") {
    const auto bad = [](std::int64_t, const State&, const Output&, const Disturbance&) {
      return ControlInput{5.0, 0.0, 0.0};
    };
    CHECK_THROWS_AS(simulate_episode(kX0, bad, weather, 1), std::runtime_error);
  }
  SUBCASE("weather shorter than the run is rejected") {
    CHECK_THROWS_AS(simulate_episode(kX0, mild_policy, weather, 1000), std::invalid_argument);
  }
}

TEST_CASE("episode csv round-trip is exact") {
  const DisturbanceSeries weather = synth_weather(WeatherProfile{.seed = 4}, 1);
  EpisodeLog log = simulate_episode(kX0, mild_policy, weather, 96);
  log.seed = 4;
  log.scenario_id = "unit";
  log.controller_id = "mild";

  const std::string path =
      (std::filesystem::temp_directory_path() / "gh_episode_rt.csv").string();
  write_episode_csv(log, path);
  const EpisodeLog loaded = load_episode_csv(path);
  CHECK(loaded == log);

  // Canonical serialization: a second write is byte-identical.
  std::ifstream in(path, std::ios::binary);
  std::string first((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(first == episode_csv_string(loaded));
  std::filesystem::remove(path);
}

TEST_CASE("episode validation catches corruption") {
  const DisturbanceSeries weather = synth_weather(WeatherProfile{.seed = 4}, 1);
  EpisodeLog log = simulate_episode(kX0, mild_policy, weather, 5);

  SUBCASE("broken measurement") {
    log.records[2].y.co2_ppm += 1.0;
    CHECK_THROWS_WITH_AS(validate_episode(log), doctest::Contains("record 2"),
                         std::runtime_error);
  }
  SUBCASE("broken step index") {
    log.records[3].k = 7;
    CHECK_THROWS_AS(validate_episode(log), std::runtime_error);
  }
  SUBCASE("empty log") {
    CHECK_THROWS_AS(validate_episode(EpisodeLog{}), std::runtime_error);
  }
}

TEST_CASE("episode csv parser reports malformed rows") {
  CHECK_THROWS_WITH_AS(parse_episode_csv("k,t_s,bad_header\n", "mem"),
                       doctest::Contains("bad header"), std::runtime_error);
  const std::string text = std::string(kEpisodeCsvHeader) + "\n0,0,1,2\n";
  CHECK_THROWS_WITH_AS(parse_episode_csv(text, "mem"), doctest::Contains("mem:2"),
                       std::runtime_error);
}
