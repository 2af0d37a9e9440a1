#pragma once

#include <string>

#include <json.hpp>

#include "hierloss/trainer.hpp"

namespace hierloss {

// One run = data paths plus the full training configuration. The JSON file
// mirrors TrainConfig::to_json: top-level sections "data", "train", "loss",
// "adapter", every field optional, unknown keys rejected.
struct RunConfig {
  std::string taxonomy_path;
  std::string features_path;
  std::string embeddings_path;
  TrainConfig train;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);
  nlohmann::ordered_json to_json() const;
};

// Applies a "section.key=value" override (e.g. "train.lr=0.01") onto a config
// JSON document before parsing. Values are JSON literals where they parse as
// such, bare strings otherwise.
void apply_override(nlohmann::json& config, const std::string& key_value);

}  // namespace hierloss
