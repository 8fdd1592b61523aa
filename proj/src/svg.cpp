#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dmtrl/experiment.hpp"

namespace dmtrl {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  void widen() {
    if (hi - lo <= 0.0) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

std::string svg_line_chart(const std::vector<double>& x, const std::vector<double>& y, const std::string& title,
                           const std::string& x_label, const std::string& y_label, bool log_y) {
  const std::size_t n = std::min(x.size(), y.size());
  std::vector<double> yy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  if (log_y) {
    double floor = std::numeric_limits<double>::infinity();
    for (double v : yy) {
      if (v > 0.0) floor = std::min(floor, v);
    }
    if (!std::isfinite(floor)) floor = 1.0;
    for (double& v : yy) v = std::log10(std::max(v, floor));
  }

  Axis ax;
  Axis ay;
  if (n > 0) {
    ax.lo = *std::min_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    ax.hi = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    ay.lo = *std::min_element(yy.begin(), yy.end());
    ay.hi = *std::max_element(yy.begin(), yy.end());
  }
  ax.widen();
  ay.widen();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (v - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + escape(title) +
       "</text>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
       num(kTop + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(kTop + ph) +
       "\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int k = 0; k <= kTicks; ++k) {
    const double vx = ax.lo + (ax.hi - ax.lo) * k / kTicks;
    const double vy = ay.lo + (ay.hi - ay.lo) * k / kTicks;
    s += "<line x1=\"" + num(px(vx)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(vx)) + "\" y2=\"" +
         num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px(vx)) + "\" y=\"" + num(kTop + ph + 20) + "\" text-anchor=\"middle\" font-size=\"11\">" +
         tick_label(vx) + "</text>\n";
    s += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py(vy)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(py(vy)) + "\" stroke=\"black\"/>\n";
    const std::string label = log_y ? "1e" + tick_label(vy) : tick_label(vy);
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(vy) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
         label + "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 15) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + escape(x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
       num(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

  if (n > 0) {
    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) s += ' ';
      s += num(px(x[k])) + "," + num(py(yy[k]));
    }
    s += "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace dmtrl
