#pragma once

// Minimal SVG line and bar charts for loss curves and ablation tables.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace hintseg::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

inline std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof(b), "%.4g", v);
  return b;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace detail

inline std::string line_chart(const std::string& title, const std::vector<Series>& series, const std::string& xlabel,
                              const std::string& ylabel, int width = 640, int height = 400) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const double L = 60, R = 140, T = 40, B = 50;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (width - L - R); };
  auto py = [&](double v) { return height - B - (v - y0) / (y1 - y0) * (height - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(title)
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << height - B << "\" x2=\"" << width - R << "\" y2=\"" << height - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << height - B << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = y0 + (y1 - y0) * t / 4.0, xv = x0 + (x1 - x0) * t / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << detail::num(yv) << "</text>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << height - B + 16 << "\" text-anchor=\"middle\">" << detail::num(xv)
       << "</text>\n";
  }
  os << "<text x=\"" << (L + width - R) / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
     << detail::escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << height / 2
     << ")\">" << detail::escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = detail::kPalette[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) os << detail::num(px(s.x[i])) << "," << detail::num(py(s.y[i])) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << width - R + 8 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << colour << "\">"
       << detail::escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Grouped bars: one group per label, one bar per series value.
inline std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                             const std::vector<Series>& series, int width = 720, int height = 420) {
  double ymax = 0;
  for (const auto& s : series)
    for (double v : s.y)
      if (std::isfinite(v)) ymax = std::max(ymax, v);
  if (ymax <= 0) ymax = 1;
  const double L = 60, R = 140, T = 40, B = 110;
  const double group_w = (width - L - R) / std::max<std::size_t>(1, labels.size());
  const double bar_w = group_w * 0.8 / std::max<std::size_t>(1, series.size());
  auto py = [&](double v) { return height - B - v / ymax * (height - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(title)
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << height - B << "\" x2=\"" << width - R << "\" y2=\"" << height - B
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = ymax * t / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << detail::num(yv) << "</text>\n";
  }
  for (std::size_t g = 0; g < labels.size(); ++g) {
    const double gx = L + g * group_w + group_w * 0.1;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = g < series[k].y.size() ? series[k].y[g] : 0.0;
      if (!std::isfinite(v)) continue;
      os << "<rect x=\"" << detail::num(gx + k * bar_w) << "\" y=\"" << detail::num(py(v)) << "\" width=\""
         << detail::num(bar_w * 0.9) << "\" height=\"" << detail::num(height - B - py(v)) << "\" fill=\""
         << detail::kPalette[k % 6] << "\"/>\n";
    }
    const double cx = L + (g + 0.5) * group_w;
    os << "<text x=\"" << detail::num(cx) << "\" y=\"" << height - B + 14 << "\" text-anchor=\"end\" transform=\"rotate(-35 "
       << detail::num(cx) << " " << height - B + 14 << ")\">" << detail::escape(labels[g]) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k)
    os << "<text x=\"" << width - R + 8 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << detail::kPalette[k % 6] << "\">"
       << detail::escape(series[k].name) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace hintseg::svg
