#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mixcx::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  // x positions drawn as markers on the line (alerts).
  std::vector<double> markers;
};

struct Panel {
  std::string title;
  std::string y_label;
  std::vector<Series> series;
  // Shaded x interval, e.g. the transaction period.
  std::optional<std::pair<double, double>> band;
};

/// Static line charts stacked vertically in one SVG document.
std::string render(const std::vector<Panel>& panels, int width = 900, int panel_height = 260);

/// A small fixed palette indexed cyclically.
std::string palette(std::size_t index);

}  // namespace mixcx::svg
