#pragma once

#include <string>
#include <vector>

namespace kcc::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
};

/// Standalone SVG document with axes, ticks and a legend.
std::string render(const LinePlot& plot);

/// Heat map of z[row][col] over x (columns) and y (rows), with a color bar.
struct Surface {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::vector<double>> z;
};

std::string render(const Surface& surface);

/// Atomic write of an SVG document.
void write(const std::string& document, const std::string& path);

}  // namespace kcc::svg
