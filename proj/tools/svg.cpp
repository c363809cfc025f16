#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace oilid::svg {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 440;
constexpr double kLeft = 80, kRight = 160, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Round tick step of roughly span / 5.
double tick_step(double span) {
  if (!(span > 0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void settle() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      const double pad = std::max(std::abs(hi) * 0.05, 1e-12);
      lo -= pad;
      hi += pad;
    }
  }
};

std::string header(double w, double h) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << " " << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return s.str();
}

}  // namespace

std::string render(const LineChart& chart) {
  Range xr, yr;
  for (const auto& s : chart.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.settle();
  yr.settle();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  if (chart.equal_aspect) {
    // Same scale on both axes: widen the narrower range about its center.
    const double sx = (xr.hi - xr.lo) / pw, sy = (yr.hi - yr.lo) / ph;
    const double s = std::max(sx, sy);
    const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
    xr.lo = cx - 0.5 * s * pw, xr.hi = cx + 0.5 * s * pw;
    yr.lo = cy - 0.5 * s * ph, yr.hi = cy + 0.5 * s * ph;
  }
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << header(kWidth, kHeight);
  o << "<text x=\"" << kWidth / 2 - kRight / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(chart.title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const double xs = tick_step(xr.hi - xr.lo), ys = tick_step(yr.hi - yr.lo);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-9 * xs; t += xs) {
    const double x = px(t);
    o << "<line x1=\"" << x << "\" y1=\"" << kTop << "\" x2=\"" << x << "\" y2=\"" << kTop + ph
      << "\" stroke=\"#eee\"/>\n<text x=\"" << x << "\" y=\"" << kTop + ph + 16
      << "\" text-anchor=\"middle\">" << num(std::abs(t) < 1e-12 * xs ? 0.0 : t) << "</text>\n";
  }
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-9 * ys; t += ys) {
    const double y = py(t);
    o << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + pw << "\" y2=\"" << y
      << "\" stroke=\"#eee\"/>\n<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\">" << num(std::abs(t) < 1e-12 * ys ? 0.0 : t) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
    << escape(chart.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(chart.y_label) << "</text>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    // Thin long series so files stay small; a few thousand points is plenty.
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / 4000);
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); k += stride)
      if (std::isfinite(s.x[k]) && std::isfinite(s.y[k])) o << num(px(s.x[k])) << "," << num(py(s.y[k])) << " ";
    o << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 34
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n<text x=\"" << kLeft + pw + 40 << "\" y=\""
      << ly << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render(const Heatmap& map) {
  const std::size_t rows = map.values.size();
  const std::size_t cols = rows ? map.values[0].size() : 0;
  Range r;
  for (const auto& row : map.values)
    for (double v : row) r.add(v);
  r.settle();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double cw = cols ? pw / static_cast<double>(cols) : pw;
  const double ch = rows ? ph / static_cast<double>(rows) : ph;

  std::ostringstream o;
  o << header(kWidth, kHeight);
  o << "<text x=\"" << kWidth / 2 - kRight / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(map.title) << "</text>\n";
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = map.values[i][j];
      const double f = (v - r.lo) / (r.hi - r.lo);
      // White to deep blue.
      const int red = static_cast<int>(std::lround(255 * (1 - 0.85 * f)));
      const int green = static_cast<int>(std::lround(255 * (1 - 0.7 * f)));
      const double x = kLeft + cw * static_cast<double>(j);
      const double y = kTop + ph - ch * static_cast<double>(i + 1);
      o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
        << "\" fill=\"rgb(" << red << "," << green << ",255)\" stroke=\"white\"/>\n";
      o << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
        << (f > 0.6 ? "white" : "black") << "\">" << num(v) << "</text>\n";
    }
  for (std::size_t j = 0; j < cols && j < map.col_labels.size(); ++j)
    o << "<text x=\"" << kLeft + cw * (static_cast<double>(j) + 0.5) << "\" y=\"" << kTop + ph + 16
      << "\" text-anchor=\"middle\">" << escape(map.col_labels[j]) << "</text>\n";
  for (std::size_t i = 0; i < rows && i < map.row_labels.size(); ++i)
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + ph - ch * (static_cast<double>(i) + 0.5) + 4
      << "\" text-anchor=\"end\">" << escape(map.row_labels[i]) << "</text>\n";
  o << "<text x=\"" << kLeft + pw + 10 << "\" y=\"" << kTop + 14 << "\">min " << num(r.lo) << " "
    << escape(map.unit) << "</text>\n<text x=\"" << kLeft + pw + 10 << "\" y=\"" << kTop + 32
    << "\">max " << num(r.hi) << " " << escape(map.unit) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace oilid::svg
