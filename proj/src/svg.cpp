#include "cardiostrain/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace cardiostrain::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
constexpr double kMarginL = 64, kMarginR = 150, kMarginT = 36, kMarginB = 48;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

struct Frame {
  double x0, x1, y0, y1;
  double w, h;
  double px(double x) const { return kMarginL + (x - x0) / (x1 - x0) * (w - kMarginL - kMarginR); }
  double py(double y) const { return h - kMarginB - (y - y0) / (y1 - y0) * (h - kMarginT - kMarginB); }
};

Frame frame_for(const std::vector<Series>& series, const PlotStyle& st) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double x : s.x) if (std::isfinite(x)) x0 = std::min(x0, x), x1 = std::max(x1, x);
    for (double y : s.y) if (std::isfinite(y)) y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (st.identity_line) {
    x0 = y0 = std::min(x0, y0);
    x1 = y1 = std::max(x1, y1);
  }
  const auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double p = span > 0 ? 0.05 * span : std::max(1e-6, 0.05 * std::abs(lo) + 0.5);
    lo -= p;
    hi += p;
  };
  pad(x0, x1);
  pad(y0, y1);
  return {x0, x1, y0, y1, static_cast<double>(st.width), static_cast<double>(st.height)};
}

void header(std::ostream& os, const Frame& f, const PlotStyle& st, const std::vector<Series>& series) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << st.width << "\" height=\"" << st.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(f.w / 2 - kMarginR / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
     << escape(st.title) << "</text>\n";
  const double L = kMarginL, R = f.w - kMarginR, T = kMarginT, B = f.h - kMarginB;
  os << "<rect x=\"" << num(L) << "\" y=\"" << num(T) << "\" width=\"" << num(R - L) << "\" height=\"" << num(B - T)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(B + 14) << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    os << "<text x=\"" << num(L - 4) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
    os << "<line x1=\"" << num(L) << "\" x2=\"" << num(R) << "\" y1=\"" << num(f.py(yv)) << "\" y2=\"" << num(f.py(yv))
       << "\" stroke=\"#eee\"/>\n";
  }
  os << "<text x=\"" << num((L + R) / 2) << "\" y=\"" << num(f.h - 10) << "\" text-anchor=\"middle\">" << escape(st.xlabel) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num((T + B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << num((T + B) / 2) << ")\">" << escape(st.ylabel) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = T + 14 + 16 * static_cast<double>(s);
    os << "<rect x=\"" << num(R + 10) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[s % 7] << "\"/>\n";
    os << "<text x=\"" << num(R + 24) << "\" y=\"" << num(y + 1) << "\">" << escape(series[s].label) << "</text>\n";
  }
}

}  // namespace

void line_plot(std::ostream& os, const std::vector<Series>& series, const PlotStyle& style) {
  const Frame f = frame_for(series, style);
  header(os, f, style, series);
  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<polyline fill=\"none\" stroke-width=\"1.6\" stroke=\"" << kPalette[s % 7] << "\" points=\"";
    const std::size_t n = std::min(series[s].x.size(), series[s].y.size());
    for (std::size_t i = 0; i < n; ++i) os << (i ? " " : "") << num(f.px(series[s].x[i])) << ',' << num(f.py(series[s].y[i]));
    os << "\"/>\n";
  }
  os << "</svg>\n";
}

void scatter_plot(std::ostream& os, const std::vector<Series>& series, const PlotStyle& style) {
  const Frame f = frame_for(series, style);
  header(os, f, style, series);
  if (style.identity_line)
    os << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(f.x0)) << "\" x2=\"" << num(f.px(f.x1)) << "\" y2=\""
       << num(f.py(f.x1)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::size_t n = std::min(series[s].x.size(), series[s].y.size());
    for (std::size_t i = 0; i < n; ++i)
      os << "<circle r=\"2.5\" fill-opacity=\"0.7\" fill=\"" << kPalette[s % 7] << "\" cx=\"" << num(f.px(series[s].x[i]))
         << "\" cy=\"" << num(f.py(series[s].y[i])) << "\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace cardiostrain::svg
