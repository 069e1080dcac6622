#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "symml/features.hpp"
#include "symml/mlp.hpp"

namespace symml {

// A trained network together with the feature map that feeds it.
struct ModelFile {
  Mlp mlp;
  FeatureMap feature_map;
  nlohmann::json metadata = nlohmann::json::object();  // free-form run info (seed, split, ...)
};

nlohmann::json to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelFile& model);
// Throws DataError on schema violations or a permutation that does not match its seed.
ModelFile model_from_json(const nlohmann::json& j);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

// Writes JSON with 2-space indentation and a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace symml
