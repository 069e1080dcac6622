#include "symml/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "symml/errors.hpp"
#include "symml/random.hpp"

namespace symml {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr int kSide = static_cast<int>(kImageSide);

GrayImage shifted(const GrayImage& image, int dx, int dy) {
  if (dx < -1 || dx > 1 || dy < -1 || dy > 1) {
    throw PreconditionError("shift magnitude must be at most one pixel");
  }
  GrayImage out = image;
  out.pixels.fill(-1.0);
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      const int sr = r - dy;
      const int sc = c - dx;
      if (sr < 0 || sr >= kSide || sc < 0 || sc >= kSide) continue;
      out.pixels[r * kSide + c] = image.pixels[sr * kSide + sc];
    }
  }
  return out;
}

GrayImage rotated(const GrayImage& image, int k) {
  k = ((k % 4) + 4) % 4;
  GrayImage out = image;
  for (int turn = 0; turn < k; ++turn) {
    const GrayImage src = out;
    // clockwise: new(r, c) = old(side-1-c, r)
    for (int r = 0; r < kSide; ++r) {
      for (int c = 0; c < kSide; ++c) {
        out.pixels[r * kSide + c] = src.pixels[(kSide - 1 - c) * kSide + r];
      }
    }
  }
  return out;
}

}  // namespace

void validate(const GrayImage& image) {
  for (double p : image.pixels) {
    if (!(p >= -1.0 && p <= 1.0)) throw DataError("pixel outside [-1, 1]");
  }
  if (image.label < 0 || image.label >= kClassCount) throw DataError("label outside 0..9");
}

// ---------------------------------------------------------------------------

Permutation Permutation::identity() {
  Permutation p;
  std::iota(p.indices.begin(), p.indices.end(), 0);
  return p;
}

Permutation Permutation::inverse() const {
  Permutation inv;
  for (std::size_t i = 0; i < kPixelCount; ++i) inv.indices[indices[i]] = static_cast<int>(i);
  return inv;
}

Permutation Permutation::compose(const Permutation& inner) const {
  Permutation out;
  for (std::size_t i = 0; i < kPixelCount; ++i) out.indices[i] = indices[inner.indices[i]];
  return out;
}

int Permutation::fixed_points() const {
  int count = 0;
  for (std::size_t i = 0; i < kPixelCount; ++i) count += indices[i] == static_cast<int>(i);
  return count;
}

bool Permutation::is_bijection() const {
  std::array<bool, kPixelCount> seen{};
  for (int v : indices) {
    if (v < 0 || v >= static_cast<int>(kPixelCount) || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation make_permutation(std::uint64_t seed) {
  Permutation p = Permutation::identity();
  Rng rng(seed, streams::kPermutation);
  rng.shuffle(std::span<int>(p.indices));
  return p;
}

// ---------------------------------------------------------------------------

GrayImage apply_group(const GroupElement& element, const GrayImage& image) {
  return std::visit(
      overloaded{
          [&](const IdentityAction&) { return image; },
          [&](const Inversion&) {
            GrayImage out = image;
            for (double& p : out.pixels) p = -p;
            return out;
          },
          [&](const Shift& s) { return shifted(image, s.dx, s.dy); },
          [&](const PixelPermutation& pp) {
            if (!pp.perm.is_bijection()) throw PreconditionError("pixel permutation is not a bijection");
            GrayImage out = image;
            for (std::size_t i = 0; i < kPixelCount; ++i) out.pixels[i] = image.pixels[pp.perm.indices[i]];
            return out;
          },
          [&](const Rotation90& r) { return rotated(image, r.k); },
      },
      element);
}

std::string describe(const GroupElement& element) {
  return std::visit(overloaded{
                        [](const IdentityAction&) { return std::string("identity"); },
                        [](const Inversion&) { return std::string("inversion"); },
                        [](const Shift& s) {
                          return "shift(" + std::to_string(s.dx) + "," + std::to_string(s.dy) + ")";
                        },
                        [](const PixelPermutation&) { return std::string("permutation"); },
                        [](const Rotation90& r) { return "rot90(" + std::to_string(r.k) + ")"; },
                    },
                    element);
}

bool is_closed(std::span<const GroupElement> group) {
  GrayImage probe;
  for (std::size_t i = 0; i < kPixelCount; ++i) {
    probe.pixels[i] = (static_cast<double>(i) + 1.0) / 128.0;  // distinct, nonzero, in (0, 1)
  }
  std::vector<GrayImage> images;
  images.reserve(group.size());
  for (const auto& g : group) images.push_back(apply_group(g, probe));
  for (const auto& g : group) {
    for (const auto& h : group) {
      const GrayImage gh = apply_group(g, apply_group(h, probe));
      if (std::find(images.begin(), images.end(), gh) == images.end()) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Identity: return "identity";
    case FeatureKind::Square: return "square";
    case FeatureKind::NeighborProduct: return "neighbor";
    case FeatureKind::PermutationProduct: return "perm";
  }
  return "identity";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "identity" || text == "x") return FeatureKind::Identity;
  if (text == "square") return FeatureKind::Square;
  if (text == "neighbor" || text == "neighbor_product") return FeatureKind::NeighborProduct;
  if (text == "perm" || text == "permutation_product") return FeatureKind::PermutationProduct;
  throw PreconditionError("unknown feature map '" + std::string(text) + "'");
}

FeatureMap FeatureMap::permutation_product(std::uint64_t seed) {
  FeatureMap map(FeatureKind::PermutationProduct);
  map.perm_seed_ = seed;
  map.perm_ = make_permutation(seed);
  return map;
}

FeatureMap FeatureMap::make(FeatureKind kind, std::uint64_t perm_seed) {
  if (kind == FeatureKind::PermutationProduct) return permutation_product(perm_seed);
  return FeatureMap(kind);
}

std::string FeatureMap::name() const {
  std::string out(to_string(kind_));
  if (perm_seed_) out += "(seed=" + std::to_string(*perm_seed_) + ")";
  return out;
}

int right_neighbor(int index) {
  const int row = index / kSide;
  const int col = index % kSide;
  return row * kSide + (col + 1) % kSide;
}

std::array<double, kPixelCount> FeatureMap::apply(const GrayImage& image) const {
  const auto& x = image.pixels;
  std::array<double, kPixelCount> out{};
  switch (kind_) {
    case FeatureKind::Identity:
      out = x;
      break;
    case FeatureKind::Square:
      for (std::size_t i = 0; i < kPixelCount; ++i) out[i] = x[i] * x[i];
      break;
    case FeatureKind::NeighborProduct:
      for (std::size_t i = 0; i < kPixelCount; ++i) {
        out[i] = x[i] * x[right_neighbor(static_cast<int>(i))];
      }
      break;
    case FeatureKind::PermutationProduct:
      for (std::size_t i = 0; i < kPixelCount; ++i) out[i] = x[i] * x[perm_->indices[i]];
      break;
  }
  return out;
}

std::array<double, kPixelCount> apply_feature_map(const FeatureMap& map, const GrayImage& image) {
  return map.apply(image);
}

double relative_sign(const GrayImage& image, int i, int j) {
  const double xi = image.pixels.at(static_cast<std::size_t>(i));
  const double xj = image.pixels.at(static_cast<std::size_t>(j));
  if (xi == 0.0 || xj == 0.0) throw PreconditionError("relative sign undefined for a zero pixel");
  const double product = xi * xj;
  return product / std::sqrt(product * product);
}

}  // namespace symml
