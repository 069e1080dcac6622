#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "symml/image.hpp"

namespace symml {

using PixelIndexArray = std::array<int, kPixelCount>;

// A bijection on the 64 pixel positions.
struct Permutation {
  PixelIndexArray indices{};

  static Permutation identity();
  Permutation inverse() const;
  // (a * b)[i] = a[b[i]]
  Permutation compose(const Permutation& inner) const;
  int fixed_points() const;
  bool is_bijection() const;

  bool operator==(const Permutation&) const = default;
};

// Fisher-Yates from a seeded stream.
Permutation make_permutation(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Group actions on pixel space

struct IdentityAction {
  bool operator==(const IdentityAction&) const = default;
};
struct Inversion {
  bool operator==(const Inversion&) const = default;
};
// Translate content by dx columns (positive = right) and dy rows (positive = down).
// Vacated cells become background (-1).
struct Shift {
  int dx = 0;
  int dy = 0;
  bool operator==(const Shift&) const = default;
};
// Output pixel i takes input pixel perm[i].
struct PixelPermutation {
  Permutation perm;
  bool operator==(const PixelPermutation&) const = default;
};
// k clockwise quarter turns.
struct Rotation90 {
  int k = 0;
  bool operator==(const Rotation90&) const = default;
};

using GroupElement = std::variant<IdentityAction, Inversion, Shift, PixelPermutation, Rotation90>;

// Label and origin are preserved. Throws PreconditionError for |dx|,|dy| > 1.
GrayImage apply_group(const GroupElement& element, const GrayImage& image);

std::string describe(const GroupElement& element);

// True if applying any two elements in sequence matches some element of the list
// on a probe image with distinct nonzero pixels.
bool is_closed(std::span<const GroupElement> group);

// ---------------------------------------------------------------------------
// Feature maps

enum class FeatureKind { Identity, Square, NeighborProduct, PermutationProduct };

std::string_view to_string(FeatureKind kind);
// Accepts "identity", "square", "neighbor", "perm" and the long spellings.
FeatureKind parse_feature_kind(std::string_view text);

// A feature transform. PermutationProduct carries its permutation so the exact
// same pairing is reused at train time, test time and after persistence.
class FeatureMap {
public:
  FeatureMap() = default;
  static FeatureMap identity() { return FeatureMap(FeatureKind::Identity); }
  static FeatureMap square() { return FeatureMap(FeatureKind::Square); }
  static FeatureMap neighbor_product() { return FeatureMap(FeatureKind::NeighborProduct); }
  static FeatureMap permutation_product(std::uint64_t seed);
  // Permutation-product kinds require a seed; others ignore it.
  static FeatureMap make(FeatureKind kind, std::uint64_t perm_seed = 0);

  FeatureKind kind() const { return kind_; }
  bool is_invariant() const { return kind_ != FeatureKind::Identity; }
  const std::optional<std::uint64_t>& perm_seed() const { return perm_seed_; }
  const std::optional<Permutation>& permutation() const { return perm_; }

  std::size_t output_dim() const { return kPixelCount; }
  std::array<double, kPixelCount> apply(const GrayImage& image) const;
  std::string name() const;

  bool operator==(const FeatureMap&) const = default;

private:
  explicit FeatureMap(FeatureKind kind) : kind_(kind) {}

  FeatureKind kind_ = FeatureKind::Identity;
  std::optional<std::uint64_t> perm_seed_;
  std::optional<Permutation> perm_;
};

std::array<double, kPixelCount> apply_feature_map(const FeatureMap& map, const GrayImage& image);

// Index of the pixel to the right of `index`, wrapping the column (cylinder).
int right_neighbor(int index);

// x_i x_j / sqrt(x_i^2 x_j^2). Throws PreconditionError if either pixel is zero.
double relative_sign(const GrayImage& image, int i, int j);

}  // namespace symml
