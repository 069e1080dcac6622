#include "symml/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace symml::svg {

namespace {

constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
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

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& series,
                      const std::vector<BarGroup>& groups, double y_max) {
  const double left = 60, top = 40, plot_h = 300, bottom_pad = 140;
  const double bar_w = 14, group_gap = 18;
  const double group_w = bar_w * static_cast<double>(std::max<std::size_t>(series.size(), 1)) + group_gap;
  const double plot_w = group_w * static_cast<double>(groups.size()) + group_gap;
  const double width = left + plot_w + 160, height = top + plot_h + bottom_pad;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = y_max * k / 5.0;
    const double y = top + plot_h - plot_h * k / 5.0;
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + plot_w) << "\" y2=\""
      << num(y) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(v)
      << "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + group_gap + group_w * static_cast<double>(g);
    for (std::size_t s = 0; s < groups[g].values.size(); ++s) {
      const double v = std::clamp(groups[g].values[s], 0.0, y_max);
      const double h = plot_h * v / y_max;
      o << "<rect x=\"" << num(gx + bar_w * static_cast<double>(s)) << "\" y=\"" << num(top + plot_h - h)
        << "\" width=\"" << num(bar_w - 2) << "\" height=\"" << num(h) << "\" fill=\""
        << kPalette[s % std::size(kPalette)] << "\"/>\n";
    }
    const double lx = gx + bar_w * static_cast<double>(groups[g].values.size()) / 2.0;
    const double ly = top + plot_h + 10;
    o << "<text x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" text-anchor=\"end\" transform=\"rotate(-60 "
      << num(lx) << ' ' << num(ly) << ")\">" << escape(groups[g].label) << "</text>\n";
  }
  o << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(left + plot_w)
    << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = top + 14.0 * static_cast<double>(s);
    o << "<rect x=\"" << num(left + plot_w + 15) << "\" y=\"" << num(y) << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[s % std::size(kPalette)] << "\"/>\n";
    o << "<text x=\"" << num(left + plot_w + 30) << "\" y=\"" << num(y + 9) << "\">" << escape(series[s])
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<std::pair<double, double>>& points) {
  const double left = 90, top = 40, plot_w = 520, plot_h = 300;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!points.empty()) {
    auto [xmin, xmax] = std::minmax_element(points.begin(), points.end(),
                                            [](const auto& a, const auto& b) { return a.first < b.first; });
    auto [ymin, ymax] = std::minmax_element(points.begin(), points.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
    x0 = xmin->first;
    x1 = xmax->first;
    y0 = ymin->second;
    y1 = ymax->second;
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    const double pad = std::max(std::abs(y0) * 1e-6, 1e-12);
    y0 -= pad;
    y1 += pad;
  }
  const auto px = [&](double x) { return left + plot_w * (x - x0) / (x1 - x0); };
  const auto py = [&](double y) { return top + plot_h - plot_h * (y - y0) / (y1 - y0); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + plot_w + 40) << "\" height=\""
    << num(top + plot_h + 60) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const double xv = x0 + (x1 - x0) * k / 4.0;
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
    o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + plot_h + 16) << "\" text-anchor=\"middle\">"
      << tick(xv) << "</text>\n";
  }
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w) << "\" height=\""
    << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : points) o << num(px(x)) << ',' << num(py(y)) << ' ';
  o << "\"/>\n";
  o << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(top + plot_h + 40)
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  o << "<text x=\"20\" y=\"" << num(top + plot_h / 2) << "\" transform=\"rotate(-90 20 " << num(top + plot_h / 2)
    << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace symml::svg
