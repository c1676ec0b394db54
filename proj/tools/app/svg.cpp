// Copyright 2026 The HyperMix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "app/svg.hpp"

#include <cstdio>
#include <sstream>

#include "hypermix/error.hpp"

namespace hypermix::app {
namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

}  // namespace

std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series) {
  if (!(spec.x_max > spec.x_min) || !(spec.y_max > spec.y_min)) {
    throw ConfigError("line chart: empty axis range");
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - spec.y_min) / (spec.y_max - spec.y_min)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(spec.title) << "</text>\n";
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
     << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = spec.x_min + (spec.x_max - spec.x_min) * i / 5.0;
    const double fy = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
    os << "<line x1=\"" << num(px(fx)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(fx))
       << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
       << num(fx) << "</text>\n";
    os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(fy)) << "\" x2=\"" << num(kLeft)
       << "\" y2=\"" << num(py(fy)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
       << num(fy) << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
     << "\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Series& ser = series[s];
    if (ser.x.size() != ser.y.size()) throw ConfigError("line chart: series '" + ser.name + "' has ragged data");
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      os << (i ? " " : "") << num(px(ser.x[i])) << ',' << num(py(ser.y[i]));
    }
    os << "\"/>\n";
    if (ser.x.size() == 1) {
      os << "<circle cx=\"" << num(px(ser.x[0])) << "\" cy=\"" << num(py(ser.y[0])) << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << num(kWidth - kRight + 15) << "\" y1=\"" << num(ly) << "\" x2=\""
       << num(kWidth - kRight + 35) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kWidth - kRight + 40) << "\" y=\"" << num(ly + 4) << "\">" << escape(ser.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace hypermix::app
