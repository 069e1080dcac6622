#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "symml/features.hpp"
#include "symml/image.hpp"
#include "symml/mlp.hpp"

namespace symml {

// One optdigits record: 64 integer pixels in 0..16 and a label.
struct RawDigit {
  std::array<int, kPixelCount> pixels{};
  int label = 0;
};

// Parses CSV lines of 65 integers. Errors name the 1-based line number.
std::vector<RawDigit> parse_optdigits(std::istream& in, const std::string& source = "<stream>");
std::vector<RawDigit> load_optdigits(const std::filesystem::path& path);

// Reads 65-column numeric CSV (integers or integral decimals like "3.0") and
// writes the canonical integer form. Returns the number of rows written.
std::size_t convert_optdigits(const std::filesystem::path& in, const std::filesystem::path& out);
void write_optdigits(std::ostream& out, std::span<const RawDigit> digits);

// raw/8 - 1, so 0 -> -1, 8 -> 0, 16 -> +1.
double scale_to_unit(int raw);
int unscale_from_unit(double x);

struct Dataset {
  std::string name;
  std::vector<GrayImage> images;
  std::vector<std::string> lineage;

  std::size_t size() const { return images.size(); }
};

// origin_id is the record index.
Dataset to_dataset(std::span<const RawDigit> digits, std::string name = "X");

// Original plus one-pixel shifts right, left, down, up (x5), origin ids kept.
Dataset augment_shifts(const Dataset& dataset);

// Every image negated; labels kept.
Dataset invert(const Dataset& dataset);

// The input followed by its inversion.
Dataset symmetrize(const Dataset& dataset);

struct SplitResult {
  Dataset train;
  Dataset test;
};

// Partitions origin_id groups; the test side gets floor(test_fraction * groups).
SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

FeatureDataset to_features(const Dataset& dataset, const FeatureMap& map);

// ---------------------------------------------------------------------------
// Rendering

// Maps [-1, 1] to 0..255 so that level(-x) == 255 - level(x) for every x,
// including signed zero.
int gray_level(double x);

// Plain (P2) 8x8 PGM.
std::string render_pgm(std::span<const double, kPixelCount> values);
void render_image(std::span<const double, kPixelCount> values, const std::filesystem::path& path);
void render_image(const GrayImage& image, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports

struct DatasetStats {
  std::size_t count = 0;
  std::array<std::size_t, kClassCount> class_counts{};
  std::array<std::size_t, 17> pixel_histogram{};  // raw values 0..16
};

DatasetStats compute_stats(std::span<const RawDigit> digits);

}  // namespace symml
