#pragma once

// Minimal static SVG charts for the report command.

#include <string>
#include <vector>

namespace oilid::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool equal_aspect = false;  // orbit plots
};

std::string render(const LineChart& chart);

/// Cell values on a rows x cols grid, colored from low (light) to high (dark).
struct Heatmap {
  std::string title;
  std::vector<std::string> row_labels;  // bottom to top
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;  // [row][col]
  std::string unit;
};

std::string render(const Heatmap& map);

}  // namespace oilid::svg
