// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dun::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

void draw_panel(std::ostringstream& os, const Panel& p, double ox, double oy, double w, double h) {
  const double left = ox + 55, right = ox + w - 15, top = oy + 30, bottom = oy + h - 40;
  os << "<g>\n<text x=\"" << ox + w / 2 << "\" y=\"" << oy + 18
     << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(p.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
     << "\" fill=\"none\" stroke=\"#333\"/>\n";

  Range xr, yr;
  if (!p.bars.empty()) {
    xr.lo = 0, xr.hi = static_cast<double>(p.bars.size());
    yr.lo = 0;
    yr.hi = 0;
    for (const auto& b : p.bars) yr.add(b.value);
  } else {
    for (const auto& s : p.lines) {
      for (double v : s.x) xr.add(v);
      for (double v : s.y) yr.add(v);
    }
  }
  xr.finish();
  yr.finish();
  auto sx = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * (right - left); };
  auto sy = [&](double v) { return bottom - (v - yr.lo) / (yr.hi - yr.lo) * (bottom - top); };

  os << "<text x=\"" << left << "\" y=\"" << bottom + 14 << "\" font-size=\"10\">" << xr.lo << "</text>\n";
  os << "<text x=\"" << right << "\" y=\"" << bottom + 14 << "\" font-size=\"10\" text-anchor=\"end\">" << xr.hi
     << "</text>\n";
  os << "<text x=\"" << left - 4 << "\" y=\"" << bottom << "\" font-size=\"10\" text-anchor=\"end\">" << yr.lo
     << "</text>\n";
  os << "<text x=\"" << left - 4 << "\" y=\"" << top + 8 << "\" font-size=\"10\" text-anchor=\"end\">" << yr.hi
     << "</text>\n";
  os << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 30 << "\" font-size=\"11\" text-anchor=\"middle\">"
     << escape(p.x_label) << "</text>\n";
  os << "<text x=\"" << ox + 12 << "\" y=\"" << (top + bottom) / 2 << "\" font-size=\"11\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 " << ox + 12 << ' ' << (top + bottom) / 2 << ")\">" << escape(p.y_label) << "</text>\n";

  if (!p.bars.empty()) {
    const double slot = (right - left) / static_cast<double>(p.bars.size());
    for (std::size_t i = 0; i < p.bars.size(); ++i) {
      const double v = std::isfinite(p.bars[i].value) ? p.bars[i].value : 0.0;
      const double y0 = sy(std::max(v, 0.0)), y1 = sy(std::min(v, 0.0));
      os << "<rect x=\"" << left + slot * static_cast<double>(i) + 1 << "\" y=\"" << y0 << "\" width=\""
         << std::max(slot - 2, 1.0) << "\" height=\"" << std::max(y1 - y0, 0.0) << "\" fill=\"" << kPalette[0]
         << "\"><title>" << escape(p.bars[i].label) << "</title></rect>\n";
    }
  }
  for (std::size_t k = 0; k < p.lines.size(); ++k) {
    const auto& s = p.lines[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << right - 4 << "\" y=\"" << top + 12 + 12 * static_cast<double>(k)
       << "\" font-size=\"10\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</g>\n";
}

}  // namespace

std::string render(const std::vector<Panel>& panels, int columns, int panel_width, int panel_height) {
  columns = std::max(columns, 1);
  const int rows = static_cast<int>((panels.size() + static_cast<std::size_t>(columns) - 1) / static_cast<std::size_t>(columns));
  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << columns * panel_width << "\" height=\""
     << std::max(rows, 1) * panel_height << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int c = static_cast<int>(i) % columns, r = static_cast<int>(i) / columns;
    draw_panel(os, panels[i], c * panel_width, r * panel_height, panel_width, panel_height);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dun::svg
