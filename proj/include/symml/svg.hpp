#pragma once

#include <string>
#include <utility>
#include <vector>

namespace symml::svg {

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series
};

// Grouped vertical bars on a [0, y_max] axis.
std::string bar_chart(const std::string& title, const std::vector<std::string>& series,
                      const std::vector<BarGroup>& groups, double y_max = 1.0);

// Polyline of (x, y) points with auto-scaled axes.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<std::pair<double, double>>& points);

}  // namespace symml::svg
