#include "mixcx/cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mixcx::svg {

namespace {

std::string num(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", v);
  return buffer;
}

std::string tick(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4g", v);
  return buffer;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

std::string palette(std::size_t index) {
  static constexpr std::array<const char*, 8> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[index % colors.size()];
}

std::string render(const std::vector<Panel>& panels, int width, int panel_height) {
  const double left = 70.0;
  const double right = 150.0;
  const double top = 30.0;
  const double bottom = 40.0;
  const int height = panel_height * static_cast<int>(std::max<std::size_t>(1, panels.size()));

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double y0 = static_cast<double>(p) * panel_height;
    const double plot_w = width - left - right;
    const double plot_h = panel_height - top - bottom;

    Range xr;
    Range yr;
    for (const auto& s : panel.series) {
      for (double v : s.x) xr.add(v);
      for (double v : s.y) yr.add(v);
    }
    xr.finish();
    yr.finish();
    const double pad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= pad;
    yr.hi += pad;
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto py = [&](double y) { return y0 + top + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };

    out << "<g>\n";
    out << "<text x=\"" << num(left) << "\" y=\"" << num(y0 + 18) << "\" font-size=\"13\">"
        << escape(panel.title) << "</text>\n";
    if (panel.band) {
      const double a = px(std::max(xr.lo, panel.band->first));
      const double b = px(std::min(xr.hi, panel.band->second));
      out << "<rect x=\"" << num(a) << "\" y=\"" << num(y0 + top) << "\" width=\""
          << num(std::max(0.0, b - a)) << "\" height=\"" << num(plot_h)
          << "\" fill=\"#cccccc\" fill-opacity=\"0.4\"/>\n";
    }
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(y0 + top) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
      const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
      out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4)
          << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
      out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(y0 + top + plot_h + 16)
          << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    }
    out << "<text x=\"16\" y=\"" << num(y0 + top + plot_h / 2) << "\" transform=\"rotate(-90 16 "
        << num(y0 + top + plot_h / 2) << ")\" text-anchor=\"middle\">" << escape(panel.y_label)
        << "</text>\n";

    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const Series& series = panel.series[s];
      out << "<polyline fill=\"none\" stroke=\"" << series.color << "\" stroke-width=\"1.5\" points=\"";
      const std::size_t count = std::min(series.x.size(), series.y.size());
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(series.y[i])) continue;
        out << num(px(series.x[i])) << ',' << num(py(series.y[i])) << ' ';
      }
      out << "\"/>\n";
      for (double m : series.markers) {
        const auto it = std::find(series.x.begin(), series.x.end(), m);
        if (it == series.x.end()) continue;
        const double yv = series.y[static_cast<std::size_t>(it - series.x.begin())];
        out << "<circle cx=\"" << num(px(m)) << "\" cy=\"" << num(py(yv)) << "\" r=\"4\" fill=\""
            << series.color << "\"/>\n";
      }
      const double ly = y0 + top + 14.0 * static_cast<double>(s) + 8.0;
      out << "<line x1=\"" << num(left + plot_w + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
          << num(left + plot_w + 30) << "\" y2=\"" << num(ly) << "\" stroke=\"" << series.color
          << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << num(left + plot_w + 34) << "\" y=\"" << num(ly + 4) << "\">"
          << escape(series.label) << "</text>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace mixcx::svg
