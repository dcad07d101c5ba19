// Copyright 2026 The lapcue Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Standalone SVG line plots and the JSON form of a lap solution.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "lapcue/io.hpp"
#include "lapcue/solver.hpp"

namespace lapcue {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// One panel, shared axes, one polyline per series.
inline std::string SvgLinePlot(const std::string& title, const std::string& x_label,
                               const std::string& y_label,
                               const std::vector<PlotSeries>& series) {
  const double w = 800, h = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x1 > x0)) { x0 = 0; x1 = 1; }
  if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto label = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(w / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         XmlEscape(title) + "</text>\n";
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(h - mb) + "\" x2=\"" + num(w - mr) +
         "\" y2=\"" + num(h - mb) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) +
         "\" y2=\"" + num(h - mb) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(h - mb + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + label(xv) + "</text>\n";
    out += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(py(yv) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + label(yv) + "</text>\n";
  }
  out += "<text x=\"" + num(w / 2) + "\" y=\"" + num(h - 10) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + XmlEscape(x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + num(h / 2) + "\" text-anchor=\"middle\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " + num(h / 2) + ")\">" + XmlEscape(y_label) + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 5];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    out += "\"/>\n";
    out += "<text x=\"" + num(w - mr - 4) + "\" y=\"" + num(mt + 14 * (k + 1)) +
           "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + color + "\">" +
           XmlEscape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

inline Json CuesToJson(const std::vector<Cue>& cues, double original_s0, double length) {
  Json a = Json::array();
  for (const auto& c : cues) {
    a.push_back({{"s_m", UnrollDistance(c.s, original_s0, length)},
                 {"cue", ToString(c.type)}});
  }
  return a;
}

inline Json WarningsToJson(const std::vector<FeasibilityReport>& warnings,
                           double original_s0, double length) {
  Json a = Json::array();
  for (const auto& w : warnings) {
    Json j = {{"singular", w.singular}, {"message", w.message}};
    if (w.threshold_index >= 0) {
      j["threshold"] = w.threshold_index == 0 ? "-lambda_b/eta_plus" : "-lambda_b*eta_minus";
      j["e_kin_sing_J"] = w.e_kin_sing;
      j["s_m"] = UnrollDistance(w.s, original_s0, length);
      j["segment"] = w.segment;
    }
    a.push_back(j);
  }
  return a;
}

}  // namespace lapcue
