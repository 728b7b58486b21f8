#include "relsem/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace relsem::svg {

namespace {

constexpr double kW = 420, kH = 300;
constexpr double kLeft = 60, kRight = 130, kTop = 30, kBottom = 45;

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
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

void panel(std::ostringstream& out, const Chart& c, double ox) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : c.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = c.log_y ? std::log10(std::max(s.y[i], 1e-12)) : s.y[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return ox + kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - ymin) / (ymax - ymin) * ph; };

  out << "<text x=\"" << px(ox + kLeft + pw / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(c.title) << "</text>\n";
  out << "<rect x=\"" << px(ox + kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(pw) << "\" height=\""
      << px(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    const double y = sy(yv);
    out << "<line x1=\"" << px(ox + kLeft) << "\" x2=\"" << px(ox + kLeft + pw) << "\" y1=\"" << px(y) << "\" y2=\""
        << px(y) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << px(ox + kLeft - 4) << "\" y=\"" << px(y + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << num(c.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
  }
  if (!c.series.empty()) {
    const auto& xs = c.series.front().x;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::string label = i < c.x_ticks.size() ? c.x_ticks[i] : num(xs[i]);
      out << "<text x=\"" << px(sx(xs[i])) << "\" y=\"" << px(kTop + ph + 14)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(label) << "</text>\n";
    }
  }
  out << "<text x=\"" << px(ox + kLeft + pw / 2) << "\" y=\"" << px(kH - 8)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(c.x_label) << "</text>\n";
  out << "<text transform=\"translate(" << px(ox + 14) << ',' << px(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"11\">" << escape(c.y_label)
      << (c.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto& s = c.series[k];
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = c.log_y ? std::log10(std::max(s.y[i], 1e-12)) : s.y[i];
      out << (i ? " " : "") << px(sx(s.x[i])) << ',' << px(sy(y));
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = c.log_y ? std::log10(std::max(s.y[i], 1e-12)) : s.y[i];
      out << "<circle cx=\"" << px(sx(s.x[i])) << "\" cy=\"" << px(sy(y)) << "\" r=\"2.5\" fill=\"" << s.color
          << "\"/>\n";
    }
    const double ly = kTop + 12 + 16 * static_cast<double>(k);
    const double lx = ox + kLeft + pw + 8;
    out << "<line x1=\"" << px(lx) << "\" x2=\"" << px(lx + 18) << "\" y1=\"" << px(ly - 4) << "\" y2=\"" << px(ly - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"4 3\"" : "")
        << "/>\n";
    out << "<text x=\"" << px(lx + 22) << "\" y=\"" << px(ly) << "\" font-size=\"10\">" << escape(s.name)
        << "</text>\n";
  }
}

}  // namespace

std::string palette(std::size_t i) {
  static constexpr std::array<const char*, 8> colors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                        "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  return colors[i % colors.size()];
}

std::string render(const std::vector<Chart>& panels) {
  std::ostringstream out;
  const double width = kW * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width) << "\" height=\"" << px(kH)
      << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) panel(out, panels[i], kW * static_cast<double>(i));
  out << "</svg>\n";
  return out.str();
}

}  // namespace relsem::svg
