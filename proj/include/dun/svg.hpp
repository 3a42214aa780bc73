// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dun::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Bar {
  std::string label;
  double value = 0.0;
};

/// A panel holds line series or bars (bars take precedence when present).
struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> lines;
  std::vector<Bar> bars;
};

/// Grid of panels as a standalone SVG document.
std::string render(const std::vector<Panel>& panels, int columns = 2, int panel_width = 420, int panel_height = 300);

}  // namespace dun::svg
