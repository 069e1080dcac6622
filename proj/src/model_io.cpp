#include "symml/model_io.hpp"

#include <fstream>

#include "symml/errors.hpp"

namespace symml {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "symml-model";
constexpr int kVersion = 1;

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("model file: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: bad field '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const FeatureMap& map) {
  json j;
  j["kind"] = std::string(to_string(map.kind()));
  if (map.perm_seed()) {
    j["perm_seed"] = *map.perm_seed();
    j["permutation"] = map.permutation()->indices;
    j["fixed_points"] = map.permutation()->fixed_points();
  }
  return j;
}

FeatureMap feature_map_from_json(const json& j) {
  FeatureKind kind{};
  try {
    kind = parse_feature_kind(require<std::string>(j, "kind"));
  } catch (const PreconditionError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  if (kind != FeatureKind::PermutationProduct) return FeatureMap::make(kind);
  const auto seed = require<std::uint64_t>(j, "perm_seed");
  const auto stored = require<std::vector<int>>(j, "permutation");
  FeatureMap map = FeatureMap::permutation_product(seed);
  if (stored.size() != kPixelCount ||
      !std::equal(stored.begin(), stored.end(), map.permutation()->indices.begin())) {
    throw DataError("model file: stored permutation does not match perm_seed " + std::to_string(seed));
  }
  return map;
}

json to_json(const ModelFile& model) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["dims"] = model.mlp.dims();
  j["bias"] = model.mlp.has_bias();
  j["feature_map"] = to_json(model.feature_map);
  json layers = json::array();
  for (const auto& l : model.mlp.layers()) {
    json lj;
    lj["fan_in"] = l.fan_in;
    lj["fan_out"] = l.fan_out;
    lj["weights"] = l.weights;
    lj["bias"] = l.bias ? json(*l.bias) : json(nullptr);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  j["metadata"] = model.metadata;
  return j;
}

ModelFile model_from_json(const json& j) {
  if (require<std::string>(j, "format") != kFormat) throw DataError("model file: unknown format");
  if (require<int>(j, "version") != kVersion) throw DataError("model file: unsupported version");
  const auto dims = require<std::vector<std::size_t>>(j, "dims");
  const bool bias = require<bool>(j, "bias");
  std::vector<DenseLayer> layers;
  for (const auto& lj : require<json>(j, "layers")) {
    DenseLayer l;
    l.fan_in = require<std::size_t>(lj, "fan_in");
    l.fan_out = require<std::size_t>(lj, "fan_out");
    l.weights = require<std::vector<double>>(lj, "weights");
    if (lj.contains("bias") && !lj.at("bias").is_null()) l.bias = require<std::vector<double>>(lj, "bias");
    layers.push_back(std::move(l));
  }
  ModelFile out;
  try {
    out.mlp = Mlp(std::move(layers));
  } catch (const ShapeError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  if (out.mlp.dims() != dims) throw DataError("model file: 'dims' disagrees with the layer shapes");
  if (out.mlp.has_bias() != bias) throw DataError("model file: 'bias' flag disagrees with the layers");
  out.feature_map = feature_map_from_json(require<json>(j, "feature_map"));
  if (out.feature_map.output_dim() != out.mlp.input_dim()) {
    throw DataError("model file: feature map output does not match the network input");
  }
  if (j.contains("metadata")) out.metadata = j.at("metadata");
  return out;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_json(to_json(model), path);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace symml
