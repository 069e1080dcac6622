#pragma once

#include <array>
#include <cstddef>

namespace symml {

inline constexpr std::size_t kImageSide = 8;
inline constexpr std::size_t kPixelCount = kImageSide * kImageSide;
inline constexpr int kClassCount = 10;

// One 8x8 digit with pixels scaled to [-1, 1], row-major.
struct GrayImage {
  std::array<double, kPixelCount> pixels{};
  int label = 0;
  int origin_id = 0;  // index of the source image before augmentation

  double at(std::size_t row, std::size_t col) const { return pixels[row * kImageSide + col]; }
  double& at(std::size_t row, std::size_t col) { return pixels[row * kImageSide + col]; }

  bool operator==(const GrayImage&) const = default;
};

// Throws DataError unless pixels are in [-1, 1] and the label is a digit.
void validate(const GrayImage& image);

}  // namespace symml
