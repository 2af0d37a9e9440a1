#include "hierloss/config.hpp"

#include <fstream>
#include <initializer_list>

#include "hierloss/error.hpp"

namespace hierloss {

namespace {

void reject_unknown(const nlohmann::json& section, const std::string& name,
                    std::initializer_list<const char*> allowed) {
  if (!section.is_object()) fail("bad_config", "section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) fail("unknown_key", "unknown key '" + name + "." + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& section, const char* key, T& out) {
  if (auto it = section.find(key); it != section.end()) out = it->get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail("bad_config", "config root must be an object");
  for (const auto& [key, value] : j.items())
    if (key != "data" && key != "train" && key != "loss" && key != "adapter")
      fail("unknown_key", "unknown config section '" + key + "'");

  RunConfig cfg;
  if (auto it = j.find("data"); it != j.end()) {
    reject_unknown(*it, "data", {"taxonomy", "features", "embeddings"});
    read_field(*it, "taxonomy", cfg.taxonomy_path);
    read_field(*it, "features", cfg.features_path);
    read_field(*it, "embeddings", cfg.embeddings_path);
  }
  if (auto it = j.find("train"); it != j.end()) {
    reject_unknown(*it, "train",
                   {"epochs", "batch_size", "lr", "weight_decay", "optimizer", "seed",
                    "val_fraction", "threads", "check_grads"});
    read_field(*it, "epochs", cfg.train.epochs);
    read_field(*it, "batch_size", cfg.train.batch_size);
    read_field(*it, "lr", cfg.train.lr);
    read_field(*it, "weight_decay", cfg.train.weight_decay);
    read_field(*it, "optimizer", cfg.train.optimizer);
    read_field(*it, "seed", cfg.train.seed);
    read_field(*it, "val_fraction", cfg.train.val_fraction);
    read_field(*it, "threads", cfg.train.threads);
    read_field(*it, "check_grads", cfg.train.check_grads);
  }
  if (auto it = j.find("loss"); it != j.end()) {
    reject_unknown(*it, "loss",
                   {"lambda1", "lambda2", "include_ce", "epsilon", "tau", "tpkl_mode"});
    read_field(*it, "lambda1", cfg.train.weights.lambda1);
    read_field(*it, "lambda2", cfg.train.weights.lambda2);
    read_field(*it, "include_ce", cfg.train.include_ce);
    if (auto eit = it->find("epsilon"); eit != it->end()) {
      if (eit->is_number())
        cfg.train.epsilon = {eit->get<double>()};
      else
        cfg.train.epsilon = eit->get<std::vector<double>>();
    }
    read_field(*it, "tau", cfg.train.tau);
    if (auto mit = it->find("tpkl_mode"); mit != it->end())
      cfg.train.tpkl_mode = tpkl_mode_from_string(mit->get<std::string>());
  }
  if (auto it = j.find("adapter"); it != j.end()) {
    reject_unknown(*it, "adapter", {"rank", "alpha", "init_scale"});
    read_field(*it, "rank", cfg.train.rank);
    read_field(*it, "alpha", cfg.train.alpha);
    read_field(*it, "init_scale", cfg.train.init_scale);
  }
  cfg.train.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("missing_file", "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("bad_format", "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["data"] = {{"taxonomy", taxonomy_path},
               {"features", features_path},
               {"embeddings", embeddings_path}};
  nlohmann::ordered_json t = train.to_json();
  j["train"] = t["train"];
  j["loss"] = t["loss"];
  j["adapter"] = t["adapter"];
  return j;
}

void apply_override(nlohmann::json& config, const std::string& key_value) {
  auto eq = key_value.find('=');
  if (eq == std::string::npos || eq == 0)
    fail("bad_override", "override '" + key_value + "' is not of the form section.key=value");
  std::string path = key_value.substr(0, eq);
  std::string raw = key_value.substr(eq + 1);
  auto dot = path.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
    fail("bad_override", "override key '" + path + "' is not of the form section.key");
  std::string section = path.substr(0, dot);
  std::string key = path.substr(dot + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare strings need no quotes
  config[section][key] = value;
}

}  // namespace hierloss
