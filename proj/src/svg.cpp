#include "lcnn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lcnn/matrix.hpp"

namespace lcnn::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) return "0";
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return !(lo <= hi); }
  void pad() {
    if (empty()) {
      lo = 0.0;
      hi = 1.0;
    } else if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
      const double d = std::max(1.0, std::abs(hi)) * 0.5;
      lo -= d;
      hi += d;
    }
  }
};

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo) || target < 2) return {lo};
  const double raw = (hi - lo) / (target - 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return ticks;
}

std::string render(const Plot& plot) {
  if (!(plot.width > 0.0) || !(plot.height > 0.0))
    throw ValidationError("svg: plot size must be positive");
  for (const Series& s : plot.series)
    if (s.x.size() != s.y.size())
      throw ValidationError("svg: series '" + s.label + "' has mismatched x and y");

  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_y || y > 0.0);
  };

  Range xr, yr;
  for (const Series& s : plot.series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) {
        xr.add(s.x[i]);
        yr.add(ty(s.y[i]));
      }
  xr.pad();
  yr.pad();
  if (plot.log_y) {
    yr.lo = std::floor(yr.lo);
    yr.hi = std::ceil(yr.hi);
    if (yr.hi == yr.lo) yr.hi += 1.0;
  } else {
    const auto t = nice_ticks(yr.lo, yr.hi);
    const double step = t.size() > 1 ? t[1] - t[0] : 0.0;
    if (step > 0.0) {
      yr.lo = std::floor(yr.lo / step) * step;
      yr.hi = std::ceil(yr.hi / step) * step;
    }
  }

  const double left = 72.0, right = 16.0, top = 36.0, bottom = 52.0;
  const double pw = plot.width - left - right;
  const double ph = plot.height - top - bottom;
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(plot.width)
     << "\" height=\"" << num(plot.height) << "\" viewBox=\"0 0 " << num(plot.width) << ' '
     << num(plot.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!plot.title.empty())
    os << "<text x=\"" << num(plot.width / 2) << "\" y=\"20\" text-anchor=\"middle\" "
       << "font-size=\"14\">" << escape(plot.title) << "</text>\n";

  os << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  const auto xt = nice_ticks(xr.lo, xr.hi);
  std::vector<double> yt;
  if (plot.log_y) {
    const int span = static_cast<int>(yr.hi - yr.lo);
    const int stride = std::max(1, span / 6);
    for (double e = yr.lo; e <= yr.hi + 1e-9; e += stride) yt.push_back(e);
  } else {
    yt = nice_ticks(yr.lo, yr.hi);
  }
  for (double t : xt)
    os << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(t))
       << "\" y2=\"" << num(top + ph) << "\"/>\n";
  for (double t : yt)
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(t)) << "\" x2=\""
       << num(left + pw) << "\" y2=\"" << num(py(t)) << "\"/>\n";
  os << "</g>\n";

  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xt)
    os << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + ph + 16)
       << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  for (double t : yt) {
    const std::string label = plot.log_y ? "1e" + tick_label(t) : tick_label(t);
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 4)
       << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  if (!plot.x_label.empty())
    os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(plot.height - 12)
       << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  if (!plot.y_label.empty())
    os << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 16 " << num(top + ph / 2) << ")\">" << escape(plot.y_label)
       << "</text>\n";

  os << "<defs><clipPath id=\"area\"><rect x=\"" << num(left) << "\" y=\"" << num(top)
     << "\" width=\"" << num(pw) << "\" height=\"" << num(ph) << "\"/></clipPath></defs>\n";
  os << "<g clip-path=\"url(#area)\" fill=\"none\" stroke-width=\"1.5\">\n";
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    const std::string color = s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
    std::string points;
    auto flush = [&] {
      if (points.empty()) return;
      os << "<polyline stroke=\"" << color << "\""
         << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << points
         << "\"/>\n";
      points.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += num(px(s.x[i])) + ',' + num(py(ty(s.y[i])));
    }
    flush();
  }
  os << "</g>\n";

  double ly = top + 14;
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    if (s.label.empty()) continue;
    const std::string color = s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
    const double lx = left + pw - 150;
    os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 24)
       << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
       << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    os << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly) << "\">" << escape(s.label)
       << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lcnn::svg
