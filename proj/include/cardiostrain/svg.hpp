#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cardiostrain::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotStyle {
  std::string title, xlabel, ylabel;
  int width = 640, height = 420;
  bool identity_line = false;  // scatter only: draw y = x
};

/// Polyline per series with axes, ticks and a legend.
void line_plot(std::ostream& os, const std::vector<Series>& series, const PlotStyle& style);

/// Marker per point, one colour per series.
void scatter_plot(std::ostream& os, const std::vector<Series>& series, const PlotStyle& style);

}  // namespace cardiostrain::svg
