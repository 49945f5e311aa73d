#pragma once

#include <string>
#include <vector>

#include "greenhouse/episode.hpp"

namespace greenhouse {

// One panel of a stacked chart: a labelled line plus optional dashed
// horizontal bound lines.
struct SvgChannel {
  std::string label;
  std::vector<double> values;
  std::vector<double> bounds;
};

// Stacked line charts over a shared time axis (days). Standalone SVG 1.1.
std::string render_svg(const std::vector<SvgChannel>& channels, double interval_s,
                       const std::string& title);

// Channel selectors: d1..d4, u1..u3, x1..x4, y1..y4. Output channels carry
// their constraint lines (CO2 cap, temperature bands, humidity band).
void emit_svg(const EpisodeLog& log, const std::vector<std::string>& channels,
              const std::string& path);

}  // namespace greenhouse
