#include "greenhouse/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace greenhouse {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string render_svg(const std::vector<SvgChannel>& channels, double interval_s,
                       const std::string& title) {
  if (channels.empty()) throw std::invalid_argument("render_svg: no channels");
  for (const SvgChannel& ch : channels) {
    if (ch.values.empty()) {
      throw std::invalid_argument("render_svg: channel '" + ch.label + "' has no samples");
    }
  }

  const double width = 900.0;
  const double panel_h = 110.0;
  const double gap = 28.0;
  const double left = 70.0;
  const double right = 20.0;
  const double top = 40.0;
  const double plot_w = width - left - right;
  const double height = top + channels.size() * (panel_h + gap);

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) +
         "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         xml_escape(title) + "</text>\n";

  for (std::size_t idx = 0; idx < channels.size(); ++idx) {
    const SvgChannel& ch = channels[idx];
    const double y0 = top + idx * (panel_h + gap);
    const std::size_t n = ch.values.size();
    const double days = static_cast<double>(n > 1 ? n - 1 : 1) * interval_s / 86400.0;

    double lo = *std::min_element(ch.values.begin(), ch.values.end());
    double hi = *std::max_element(ch.values.begin(), ch.values.end());
    for (double b : ch.bounds) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    if (!(hi > lo)) {
      hi = lo + 1.0;
      lo -= 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto px = [&](std::size_t i) {
      return left + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
    };
    auto py = [&](double v) { return y0 + panel_h - panel_h * (v - lo) / (hi - lo); };

    svg += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(y0) + "\" width=\"" + num(plot_w) +
           "\" height=\"" + num(panel_h) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg += "<text x=\"" + num(left) + "\" y=\"" + num(y0 - 6.0) + "\">" + xml_escape(ch.label) +
           "</text>\n";
    svg += "<text x=\"" + num(left - 6.0) + "\" y=\"" + num(y0 + 10.0) +
           "\" text-anchor=\"end\">" + num(hi) + "</text>\n";
    svg += "<text x=\"" + num(left - 6.0) + "\" y=\"" + num(y0 + panel_h) +
           "\" text-anchor=\"end\">" + num(lo) + "</text>\n";

    for (double b : ch.bounds) {
      svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(b)) + "\" x2=\"" +
             num(left + plot_w) + "\" y2=\"" + num(py(b)) +
             "\" stroke=\"#cc3333\" stroke-dasharray=\"6,4\"/>\n";
    }

    if (n == 1) {
      svg += "<circle cx=\"" + num(px(0)) + "\" cy=\"" + num(py(ch.values[0])) +
             "\" r=\"3\" fill=\"#2255aa\"/>\n";
    } else {
      svg += "<polyline fill=\"none\" stroke=\"#2255aa\" stroke-width=\"1\" points=\"";
      for (std::size_t i = 0; i < n; ++i) {
        if (i) svg.push_back(' ');
        svg += num(px(i)) + "," + num(py(ch.values[i]));
      }
      svg += "\"/>\n";
    }
    if (idx + 1 == channels.size()) {
      svg += "<text x=\"" + num(left + plot_w) + "\" y=\"" + num(y0 + panel_h + 16.0) +
             "\" text-anchor=\"end\">time [days], span " + num(days) + "</text>\n";
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_svg(const EpisodeLog& log, const std::vector<std::string>& channels,
              const std::string& path) {
  if (channels.empty()) throw std::invalid_argument("emit_svg: empty channel list");
  if (log.records.empty()) throw std::invalid_argument("emit_svg: empty episode log");

  struct Spec {
    std::string label;
    int group;  // 0=d, 1=u, 2=x, 3=y
    int index;
    std::vector<double> bounds;
  };
  static const std::map<std::string, Spec> specs = {
      {"d1", {"solar radiation [W/m2]", 0, 0, {}}},
      {"d2", {"outdoor CO2 [kg/m3]", 0, 1, {}}},
      {"d3", {"outdoor temperature [degC]", 0, 2, {}}},
      {"d4", {"outdoor humidity [kg/m3]", 0, 3, {}}},
      {"u1", {"CO2 injection [mg/m2/s]", 1, 0, {0.0, 1.2}}},
      {"u2", {"ventilation [mm/s]", 1, 1, {0.0, 7.5}}},
      {"u3", {"heating [W/m2]", 1, 2, {0.0, 150.0}}},
      {"x1", {"dry weight [kg/m2]", 2, 0, {}}},
      {"x2", {"indoor CO2 [kg/m3]", 2, 1, {}}},
      {"x3", {"indoor temperature [degC]", 2, 2, {}}},
      {"x4", {"indoor humidity [kg/m3]", 2, 3, {}}},
      {"y1", {"dry weight [g/m2]", 3, 0, {}}},
      {"y2", {"indoor CO2 [ppm]", 3, 1, {1000.0}}},
      {"y3", {"indoor temperature [degC]", 3, 2, {10.0, 15.0, 20.0}}},
      {"y4", {"relative humidity [%]", 3, 3, {50.0, 85.0}}},
  };

  std::vector<SvgChannel> out;
  for (const std::string& name : channels) {
    const auto it = specs.find(name);
    if (it == specs.end()) throw std::invalid_argument("emit_svg: unknown channel '" + name + "'");
    SvgChannel ch;
    ch.label = it->second.label;
    ch.bounds = it->second.bounds;
    ch.values.reserve(log.records.size());
    for (const EpisodeRecord& r : log.records) {
      double v = 0.0;
      switch (it->second.group) {
        case 0: v = r.d.as_array()[static_cast<std::size_t>(it->second.index)]; break;
        case 1: v = r.u.as_array()[static_cast<std::size_t>(it->second.index)]; break;
        case 2: v = r.x.as_array()[static_cast<std::size_t>(it->second.index)]; break;
        default: v = r.y.as_array()[static_cast<std::size_t>(it->second.index)]; break;
      }
      ch.values.push_back(v);
    }
    out.push_back(std::move(ch));
  }

  const double interval = log.records.size() > 1
                              ? static_cast<double>(log.records[1].t_s - log.records[0].t_s)
                              : 900.0;
  const std::string svg = render_svg(out, interval, log.controller_id.empty()
                                                        ? std::string("episode")
                                                        : log.controller_id);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << svg;
}

}  // namespace greenhouse
