#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "symml/data.hpp"
#include "symml/errors.hpp"

using namespace symml;
namespace fs = std::filesystem;

namespace {

const std::string kCorpus = SYMML_DATA_DIR "/optdigits.csv";

std::string line_of(const std::array<int, 64>& px, int label) {
  std::string s;
  for (int p : px) s += std::to_string(p) + ",";
  return s + std::to_string(label);
}

std::vector<RawDigit> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_optdigits(in, "mem");
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("symml_test_" + name); }

}  // namespace

TEST_CASE("scaling") {
  CHECK(scale_to_unit(0) == -1.0);
  CHECK(scale_to_unit(16) == 1.0);
  CHECK(scale_to_unit(4) == -0.5);
  CHECK(scale_to_unit(8) == 0.0);
  CHECK_THROWS_AS(scale_to_unit(17), DataError);
  CHECK_THROWS_AS(scale_to_unit(-1), DataError);
  for (int raw = 0; raw <= 16; ++raw) CHECK(unscale_from_unit(scale_to_unit(raw)) == raw);
}

TEST_CASE("parse optdigits") {
  std::array<int, 64> zeros{};
  const auto one = parse(line_of(zeros, 3) + "\n");
  REQUIRE(one.size() == 1);
  CHECK(one[0].label == 3);
  const Dataset ds = to_dataset(one);
  for (double p : ds.images[0].pixels) CHECK(p == -1.0);

  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(parse("\n\n"), DataError);

  std::array<int, 64> bad = zeros;
  bad[5] = 17;
  try {
    parse(line_of(zeros, 1) + "\n" + line_of(bad, 2) + "\n");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("mem:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("1,2,3\n"), DataError);
  CHECK_THROWS_AS(parse(line_of(zeros, 10)), DataError);
  CHECK_THROWS_AS(parse(line_of(zeros, 1) + ",4"), DataError);
}

TEST_CASE("the vendored corpus") {
  const auto raw = load_optdigits(kCorpus);
  CHECK(raw.size() == 1797);
  const auto stats = compute_stats(raw);
  CHECK(stats.count == 1797);
  std::size_t total = 0;
  for (std::size_t c : stats.class_counts) {
    CHECK(c >= 174);
    CHECK(c <= 183);
    total += c;
  }
  CHECK(total == 1797);
  std::size_t pixels = 0;
  for (std::size_t h : stats.pixel_histogram) pixels += h;
  CHECK(pixels == 1797 * 64);

  SUBCASE("write / parse round trip") {
    std::ostringstream out;
    write_optdigits(out, raw);
    std::istringstream in(out.str());
    const auto again = parse_optdigits(in);
    REQUIRE(again.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(again[i].pixels == raw[i].pixels);
      CHECK(again[i].label == raw[i].label);
    }
  }
  SUBCASE("scale then unscale reproduces the raw integers") {
    const Dataset ds = to_dataset(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(ds.images[i].origin_id == static_cast<int>(i));
      for (int p = 0; p < 64; ++p) REQUIRE(unscale_from_unit(ds.images[i].pixels[p]) == raw[i].pixels[p]);
    }
  }
  SUBCASE("convert") {
    const fs::path out = temp_path("convert.csv");
    CHECK(convert_optdigits(kCorpus, out) == 1797);
    CHECK(load_optdigits(out).size() == 1797);
    fs::remove(out);
  }
}

TEST_CASE("augment_shifts") {
  SUBCASE("corpus size") {
    const Dataset ds = to_dataset(load_optdigits(kCorpus));
    const Dataset aug = augment_shifts(ds);
    CHECK(aug.size() == 8985);
    std::map<int, std::multiset<int>> labels;
    for (const auto& img : aug.images) labels[img.origin_id].insert(img.label);
    CHECK(labels.size() == 1797);
    for (const auto& [origin, ls] : labels) {
      CHECK(ls.size() == 5);
      CHECK(ls.count(ds.images[origin].label) == 5);
    }
  }
  SUBCASE("blank image stays blank") {
    Dataset ds;
    ds.images.push_back(testing::constant_image(-1.0, 4));
    const Dataset aug = augment_shifts(ds);
    REQUIRE(aug.size() == 5);
    for (const auto& img : aug.images) CHECK(img == ds.images[0]);
  }
  SUBCASE("one hot pixel at (3,3)") {
    Dataset ds;
    GrayImage img = testing::constant_image(-1.0, 2);
    img.pixels[3 * 8 + 3] = 1.0;
    ds.images.push_back(img);
    const Dataset aug = augment_shifts(ds);
    REQUIRE(aug.size() == 5);
    const std::pair<int, int> expected[] = {{3, 3}, {3, 4}, {3, 2}, {4, 3}, {2, 3}};
    for (int k = 0; k < 5; ++k) {
      int hot = -1, count = 0;
      for (int i = 0; i < 64; ++i) {
        if (aug.images[k].pixels[i] == 1.0) {
          hot = i;
          ++count;
        }
      }
      CHECK(count == 1);
      CHECK(hot / 8 == expected[k].first);
      CHECK(hot % 8 == expected[k].second);
    }
  }
}

TEST_CASE("invert and symmetrize") {
  Rng rng(20);
  Dataset ds;
  ds.name = "X";
  for (int i = 0; i < 37; ++i) {
    GrayImage img = testing::random_image(rng, i % 10);
    img.origin_id = i;
    ds.images.push_back(img);
  }
  const Dataset inv = invert(ds);
  CHECK(inv.name == "-X");
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(inv.images[i] == testing::negate(ds.images[i]));

  const Dataset sym = symmetrize(ds);
  REQUIRE(sym.size() == 2 * ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(sym.images[i] == ds.images[i]);
    CHECK(sym.images[ds.size() + i] == inv.images[i]);
  }
  // x and -x cancel pairwise in the same order, so the sum is exactly zero
  for (int p = 0; p < 64; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) s += sym.images[i].pixels[p];
    for (std::size_t i = 0; i < ds.size(); ++i) s += sym.images[ds.size() + i].pixels[p];
    CHECK(std::abs(s) < 1e-12);
  }
  double mean = 0.0;
  for (const auto& img : sym.images) {
    for (double p : img.pixels) mean += p;
  }
  CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("split") {
  const Dataset aug = augment_shifts(to_dataset(load_optdigits(kCorpus)));
  const auto parts = split(aug, 0.25, 0);
  std::set<int> train_origins, test_origins;
  for (const auto& img : parts.train.images) train_origins.insert(img.origin_id);
  for (const auto& img : parts.test.images) test_origins.insert(img.origin_id);
  CHECK(train_origins.size() == 1348);
  CHECK(test_origins.size() == 449);
  CHECK(parts.train.size() == 1348 * 5);
  CHECK(parts.test.size() == 449 * 5);
  for (int o : test_origins) CHECK_FALSE(train_origins.count(o));
  CHECK(parts.train.name == "X_train");
  CHECK(parts.test.name == "X_test");

  const auto again = split(aug, 0.25, 0);
  CHECK(again.test.images == parts.test.images);
  const auto other = split(aug, 0.25, 1);
  CHECK_FALSE(other.test.images == parts.test.images);

  CHECK_THROWS_AS(split(aug, 0.0, 0), PreconditionError);
  CHECK_THROWS_AS(split(aug, 1.0, 0), PreconditionError);
  CHECK_THROWS_AS(split(aug, 0.0001, 0), PreconditionError);
}

TEST_CASE("to_features") {
  Rng rng(21);
  Dataset ds;
  for (int i = 0; i < 5; ++i) ds.images.push_back(testing::random_image(rng, i));
  const FeatureDataset fd = to_features(ds, FeatureMap::square());
  CHECK(fd.dim == 64);
  REQUIRE(fd.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(fd.labels[i] == static_cast<int>(i));
    const auto row = fd.row(i);
    for (int p = 0; p < 64; ++p) CHECK(row[p] == ds.images[i].pixels[p] * ds.images[i].pixels[p]);
  }
}

TEST_CASE("rendering") {
  CHECK(gray_level(-1.0) == 0);
  CHECK(gray_level(1.0) == 255);
  Rng rng(22);
  for (int t = 0; t < 10000; ++t) {
    const double x = t < 17 ? scale_to_unit(t) : rng.uniform(-1.0, 1.0);
    const int g = gray_level(x);
    CHECK((g >= 0 && g <= 255));
    CHECK(gray_level(-x) == 255 - g);
  }
  // monotone
  int prev = 0;
  for (int raw = 0; raw <= 16; ++raw) {
    CHECK(gray_level(scale_to_unit(raw)) >= prev);
    prev = gray_level(scale_to_unit(raw));
  }

  const GrayImage black = testing::constant_image(-1.0);
  const std::string pgm = render_pgm(black.pixels);
  CHECK(pgm.rfind("P2\n8 8\n255\n", 0) == 0);
  std::istringstream in(pgm.substr(11));
  int v, n = 0;
  while (in >> v) {
    CHECK(v == 0);
    ++n;
  }
  CHECK(n == 64);

  SUBCASE("neighbor features show region boundaries") {
    GrayImage img = testing::constant_image(-1.0);
    for (int r = 0; r < 8; ++r) {
      for (int c = 3; c < 6; ++c) img.pixels[r * 8 + c] = 1.0;
    }
    const auto f = FeatureMap::neighbor_product().apply(img);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        const bool boundary = c == 2 || c == 5;
        CHECK(gray_level(f[r * 8 + c]) == (boundary ? 0 : 255));
      }
    }
  }
  SUBCASE("files") {
    const fs::path p = temp_path("render.pgm");
    render_image(black, p);
    std::ifstream file(p);
    std::stringstream buf;
    buf << file.rdbuf();
    CHECK(buf.str() == pgm);
    fs::remove(p);
    CHECK_THROWS_AS(render_image(black, "/nonexistent-dir/x.pgm"), DataError);
  }
}
