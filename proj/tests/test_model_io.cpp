#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "symml/errors.hpp"
#include "symml/model_io.hpp"

using namespace symml;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Mlp awkward_model(bool bias) {
  const std::vector<std::size_t> dims{64, 10, 5, 10};
  Mlp m = Mlp::random(dims, bias, 42);
  // values with long binary expansions and extreme magnitudes
  m.mutable_layers()[0].weights[0] = 0.1 + 0.2;
  m.mutable_layers()[0].weights[1] = 1e-300;
  m.mutable_layers()[1].weights[2] = -5e-324;
  m.mutable_layers()[2].weights[3] = 123456789.123456789;
  if (bias) (*m.mutable_layers()[1].bias)[0] = -1.0 / 3.0;
  return m;
}

}  // namespace

TEST_CASE("model persistence round trips bit-exactly") {
  for (bool bias : {false, true}) {
    for (const FeatureMap& map : {FeatureMap::identity(), FeatureMap::square(), FeatureMap::neighbor_product(),
                                  FeatureMap::permutation_product(11)}) {
      ModelFile model{awkward_model(bias), map, {{"seed", 42}}};
      const fs::path p = fs::temp_directory_path() / "symml_test_model.json";
      save_model(model, p);
      const ModelFile back = load_model(p);
      CHECK(back.mlp == model.mlp);
      CHECK(back.feature_map == map);
      CHECK(back.metadata["seed"] == 42);
      for (std::size_t i = 0; i < model.mlp.parameter_count(); ++i) {
        REQUIRE(std::bit_cast<std::uint64_t>(back.mlp.parameter(i)) ==
                std::bit_cast<std::uint64_t>(model.mlp.parameter(i)));
      }
      // saving the loaded model gives the same bytes
      const fs::path q = fs::temp_directory_path() / "symml_test_model2.json";
      save_model(back, q);
      std::ifstream a(p), b(q);
      std::stringstream sa, sb;
      sa << a.rdbuf();
      sb << b.rdbuf();
      CHECK(sa.str() == sb.str());
      fs::remove(p);
      fs::remove(q);
    }
  }
}

TEST_CASE("model json layout") {
  const ModelFile model{awkward_model(false), FeatureMap::permutation_product(3), {}};
  const json j = to_json(model);
  CHECK(j["format"] == "symml-model");
  CHECK(j["dims"] == json({64, 10, 5, 10}));
  CHECK(j["bias"] == false);
  CHECK(j["feature_map"]["kind"] == "perm");
  CHECK(j["feature_map"]["perm_seed"] == 3);
  CHECK(j["feature_map"]["permutation"].size() == 64);
  CHECK(j["feature_map"]["fixed_points"] == make_permutation(3).fixed_points());
  CHECK(j["layers"][0]["bias"].is_null());
}

TEST_CASE("invalid model files are rejected") {
  const ModelFile model{awkward_model(false), FeatureMap::permutation_product(3), {}};
  const json good = to_json(model);

  json tampered = good;
  std::swap(tampered["feature_map"]["permutation"][0], tampered["feature_map"]["permutation"][1]);
  CHECK_THROWS_AS(model_from_json(tampered), DataError);

  json wrong_dims = good;
  wrong_dims["layers"][1]["fan_in"] = 9;
  CHECK_THROWS_AS(model_from_json(wrong_dims), DataError);

  json short_weights = good;
  short_weights["layers"][0]["weights"].erase(0);
  CHECK_THROWS_AS(model_from_json(short_weights), DataError);

  json bad_format = good;
  bad_format["format"] = "other";
  CHECK_THROWS_AS(model_from_json(bad_format), DataError);

  json bad_kind = good;
  bad_kind["feature_map"]["kind"] = "cubic";
  CHECK_THROWS(model_from_json(bad_kind));

  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), DataError);
  const fs::path p = fs::temp_directory_path() / "symml_test_garbage.json";
  std::ofstream(p) << "{not json";
  CHECK_THROWS_AS(load_model(p), DataError);
  fs::remove(p);
}
