#pragma once

#include <string>
#include <vector>

namespace relsem::svg {

struct Series {
  std::string name;
  std::string color;  // any SVG color
  bool dashed = false;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<std::string> x_ticks;  // optional labels at the x values of the first series
  std::vector<Series> series;
};

/// Charts laid out left to right in one SVG document.
std::string render(const std::vector<Chart>& panels);

/// Stable color for the i-th series family.
std::string palette(std::size_t i);

}  // namespace relsem::svg
