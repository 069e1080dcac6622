#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "symml/image.hpp"
#include "symml/random.hpp"

namespace testing {

inline symml::GrayImage random_image(symml::Rng& rng, int label = 0) {
  symml::GrayImage img{};
  for (auto& p : img.pixels) p = rng.uniform(-1.0, 1.0);
  img.label = label;
  return img;
}

inline symml::GrayImage constant_image(double v, int label = 0) {
  symml::GrayImage img{};
  img.pixels.fill(v);
  img.label = label;
  return img;
}

inline symml::GrayImage negate(symml::GrayImage img) {
  for (auto& p : img.pixels) p = -p;
  return img;
}

inline std::vector<double> random_vector(symml::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline std::vector<double> negated(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace testing
