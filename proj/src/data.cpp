#include "symml/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "symml/errors.hpp"
#include "symml/random.hpp"

namespace symml {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

int parse_int(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(t, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": '" + t + "' is not an integer");
  }
  if (used != t.size()) throw DataError(where + ": '" + t + "' is not an integer");
  return v;
}

}  // namespace

std::vector<RawDigit> parse_optdigits(std::istream& in, const std::string& source) {
  std::vector<RawDigit> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto cells = split_csv(line);
    if (cells.size() != kPixelCount + 1) {
      throw DataError(where + ": expected 65 comma-separated values, found " + std::to_string(cells.size()));
    }
    RawDigit d;
    for (std::size_t i = 0; i < kPixelCount; ++i) {
      d.pixels[i] = parse_int(cells[i], where);
      if (d.pixels[i] < 0 || d.pixels[i] > 16) {
        throw DataError(where + ": pixel " + std::to_string(i) + " = " + std::to_string(d.pixels[i]) +
                        " outside 0..16");
      }
    }
    d.label = parse_int(cells[kPixelCount], where);
    if (d.label < 0 || d.label >= kClassCount) {
      throw DataError(where + ": label " + std::to_string(d.label) + " outside 0..9");
    }
    out.push_back(d);
  }
  if (out.empty()) throw DataError(source + ": no digit records");
  return out;
}

std::vector<RawDigit> load_optdigits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_optdigits(in, path.string());
}

void write_optdigits(std::ostream& out, std::span<const RawDigit> digits) {
  for (const auto& d : digits) {
    for (int p : d.pixels) out << p << ',';
    out << d.label << '\n';
  }
}

std::size_t convert_optdigits(const std::filesystem::path& in_path, const std::filesystem::path& out_path) {
  std::ifstream in(in_path);
  if (!in) throw DataError("cannot open " + in_path.string());
  std::ostringstream canonical;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string t = trim(cells[i]);
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != t.size() || t.empty() || v != std::floor(v)) {
        throw DataError(in_path.string() + ":" + std::to_string(line_no) + ": '" + t +
                        "' is not an integral value");
      }
      canonical << static_cast<long>(v) << (i + 1 < cells.size() ? "," : "\n");
    }
  }
  std::istringstream check(canonical.str());
  const auto digits = parse_optdigits(check, in_path.string());
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path.string());
  write_optdigits(out, digits);
  return digits.size();
}

double scale_to_unit(int raw) {
  if (raw < 0 || raw > 16) throw DataError("raw pixel " + std::to_string(raw) + " outside 0..16");
  return static_cast<double>(raw) / 8.0 - 1.0;
}

int unscale_from_unit(double x) { return static_cast<int>(std::lround((x + 1.0) * 8.0)); }

Dataset to_dataset(std::span<const RawDigit> digits, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  ds.images.reserve(digits.size());
  for (std::size_t k = 0; k < digits.size(); ++k) {
    GrayImage img;
    for (std::size_t i = 0; i < kPixelCount; ++i) img.pixels[i] = scale_to_unit(digits[k].pixels[i]);
    img.label = digits[k].label;
    img.origin_id = static_cast<int>(k);
    ds.images.push_back(img);
  }
  ds.lineage.push_back("load(" + std::to_string(digits.size()) + ")");
  return ds;
}

Dataset augment_shifts(const Dataset& dataset) {
  static const std::array<GroupElement, 5> kCopies = {
      IdentityAction{}, Shift{1, 0}, Shift{-1, 0}, Shift{0, 1}, Shift{0, -1}};
  Dataset out;
  out.name = dataset.name;
  out.lineage = dataset.lineage;
  out.lineage.push_back("augment_shifts(x5)");
  out.images.reserve(dataset.size() * kCopies.size());
  for (const auto& img : dataset.images) {
    for (const auto& g : kCopies) out.images.push_back(apply_group(g, img));
  }
  return out;
}

Dataset invert(const Dataset& dataset) {
  Dataset out;
  out.name = "-" + dataset.name;
  out.lineage = dataset.lineage;
  out.lineage.push_back("invert");
  out.images.reserve(dataset.size());
  for (const auto& img : dataset.images) out.images.push_back(apply_group(Inversion{}, img));
  return out;
}

Dataset symmetrize(const Dataset& dataset) {
  Dataset out;
  out.name = "+-" + dataset.name;
  out.lineage = dataset.lineage;
  out.lineage.push_back("symmetrize");
  out.images = dataset.images;
  out.images.reserve(2 * dataset.size());
  for (const auto& img : dataset.images) out.images.push_back(apply_group(Inversion{}, img));
  return out;
}

SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw PreconditionError("test_fraction must be in (0, 1)");
  }
  std::set<int> origin_set;
  for (const auto& img : dataset.images) origin_set.insert(img.origin_id);
  std::vector<int> origins(origin_set.begin(), origin_set.end());
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(origins.size())));
  if (n_test == 0 || n_test == origins.size()) {
    throw PreconditionError("test_fraction leaves one side of the split empty");
  }
  Rng rng(seed, streams::kSplit);
  rng.shuffle(std::span<int>(origins));
  const std::set<int> test_origins(origins.begin(), origins.begin() + static_cast<std::ptrdiff_t>(n_test));

  SplitResult out;
  out.train.name = dataset.name + "_train";
  out.test.name = dataset.name + "_test";
  const std::string tag = "split(test_fraction=" + std::to_string(test_fraction) + ",seed=" + std::to_string(seed) + ")";
  out.train.lineage = dataset.lineage;
  out.train.lineage.push_back(tag + ":train");
  out.test.lineage = dataset.lineage;
  out.test.lineage.push_back(tag + ":test");
  for (const auto& img : dataset.images) {
    (test_origins.count(img.origin_id) ? out.test : out.train).images.push_back(img);
  }
  return out;
}

FeatureDataset to_features(const Dataset& dataset, const FeatureMap& map) {
  FeatureDataset fd;
  fd.dim = map.output_dim();
  fd.values.reserve(dataset.size() * fd.dim);
  fd.labels.reserve(dataset.size());
  for (const auto& img : dataset.images) {
    const auto f = map.apply(img);
    fd.push_back(f, img.label);
  }
  return fd;
}

// ---------------------------------------------------------------------------

int gray_level(double x) {
  // Exact midpoint 127.5 + 127.5x rounded away from the centre in the direction
  // of x's sign bit, which makes the map antisymmetric about 127.5.
  const double t = 127.5 * std::min(std::abs(x), 1.0);
  const int offset = static_cast<int>(std::floor(t));
  return std::signbit(x) ? 127 - offset : 128 + offset;
}

std::string render_pgm(std::span<const double, kPixelCount> values) {
  std::ostringstream out;
  out << "P2\n" << kImageSide << ' ' << kImageSide << "\n255\n";
  for (std::size_t r = 0; r < kImageSide; ++r) {
    for (std::size_t c = 0; c < kImageSide; ++c) {
      out << gray_level(values[r * kImageSide + c]) << (c + 1 < kImageSide ? " " : "\n");
    }
  }
  return out.str();
}

void render_image(std::span<const double, kPixelCount> values, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << render_pgm(values);
  if (!out) throw DataError("failed writing " + path.string());
}

void render_image(const GrayImage& image, const std::filesystem::path& path) {
  validate(image);
  render_image(std::span<const double, kPixelCount>(image.pixels), path);
}

DatasetStats compute_stats(std::span<const RawDigit> digits) {
  DatasetStats s;
  s.count = digits.size();
  for (const auto& d : digits) {
    ++s.class_counts[d.label];
    for (int p : d.pixels) ++s.pixel_histogram[p];
  }
  return s;
}

}  // namespace symml
