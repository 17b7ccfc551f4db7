#pragma once

#include <string>
#include <vector>

namespace lcnn::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  ///< empty picks from the default palette
  bool dashed = false;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;  ///< non-positive values are dropped on a log axis
  double width = 640.0;
  double height = 400.0;
};

/// Polyline chart with axes, ticks and a legend. Non-finite points split a
/// series into separate polylines.
std::string render(const Plot& plot);

/// Evenly spaced "nice" tick positions covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

}  // namespace lcnn::svg
