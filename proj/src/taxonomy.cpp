#include "hierloss/taxonomy.hpp"

#include <fstream>
#include <unordered_map>

#include "hierloss/error.hpp"

namespace hierloss {

Taxonomy Taxonomy::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("levels") || !doc["levels"].is_array())
    fail("bad_taxonomy", "taxonomy document must contain a 'levels' array");
  const auto& levels = doc["levels"];
  if (levels.empty()) fail("bad_taxonomy", "taxonomy has no levels");

  Taxonomy tax;
  std::unordered_map<std::string, int> prev_ids;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& jl = levels[l];
    Level level;
    level.name = jl.value("name", "level" + std::to_string(l + 1));
    if (!jl.contains("classes") || !jl["classes"].is_array() || jl["classes"].empty())
      fail("empty_level", "level '" + level.name + "' has no classes");

    std::unordered_map<std::string, int> ids;
    for (const auto& jc : jl["classes"]) {
      std::string name = jc.at("name").get<std::string>();
      if (ids.count(name))
        fail("duplicate_class", "duplicate class name '" + name + "' in level '" + level.name + "'");
      ids[name] = static_cast<int>(level.class_names.size());
      level.class_names.push_back(name);

      if (l == 0) {
        if (jc.contains("parent"))
          fail("bad_taxonomy", "class '" + name + "' at the first level must not name a parent");
      } else {
        if (!jc.contains("parent"))
          fail("orphan_class", "class '" + name + "' has no parent");
        std::string parent = jc["parent"].get<std::string>();
        auto it = prev_ids.find(parent);
        if (it == prev_ids.end())
          fail("orphan_class",
               "class '" + name + "' names nonexistent parent '" + parent + "'");
        level.parent.push_back(it->second);
      }
    }
    prev_ids = std::move(ids);
    tax.total_classes_ += static_cast<int>(level.class_names.size());
    tax.levels_.push_back(std::move(level));
  }
  tax.build_children();
  return tax;
}

Taxonomy Taxonomy::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("missing_file", "cannot open taxonomy file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("bad_taxonomy", "taxonomy file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

Taxonomy Taxonomy::balanced(const std::vector<int>& branching) {
  if (branching.empty()) fail("bad_taxonomy", "branching list is empty");
  for (int b : branching)
    if (b < 1) fail("bad_taxonomy", "branching factors must be >= 1");

  Taxonomy tax;
  int count = 1;
  for (std::size_t l = 0; l < branching.size(); ++l) {
    count *= branching[l];
    Level level;
    level.name = "level" + std::to_string(l + 1);
    for (int i = 0; i < count; ++i) {
      level.class_names.push_back("l" + std::to_string(l + 1) + "_c" + std::to_string(i));
      if (l > 0) level.parent.push_back(i / branching[l]);
    }
    tax.total_classes_ += count;
    tax.levels_.push_back(std::move(level));
  }
  tax.build_children();
  return tax;
}

nlohmann::json Taxonomy::to_json() const {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const Level& level = levels_[l];
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t i = 0; i < level.class_names.size(); ++i) {
      nlohmann::json jc{{"name", level.class_names[i]}};
      if (l > 0) jc["parent"] = levels_[l - 1].class_names[level.parent[i]];
      classes.push_back(std::move(jc));
    }
    levels.push_back({{"name", level.name}, {"classes", std::move(classes)}});
  }
  return {{"levels", std::move(levels)}};
}

void Taxonomy::build_children() {
  for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
    levels_[l].children.assign(levels_[l].class_names.size(), {});
    const Level& next = levels_[l + 1];
    for (std::size_t c = 0; c < next.class_names.size(); ++c)
      levels_[l].children[next.parent[c]].push_back(static_cast<int>(c));
  }
}

void Taxonomy::check_level(std::size_t level) const {
  if (level >= levels_.size())
    fail("bad_level", "level index " + std::to_string(level) + " out of range");
}

void Taxonomy::check_id(std::size_t level, int id) const {
  check_level(level);
  if (id < 0 || id >= class_count(level))
    fail("bad_class_id", "class id " + std::to_string(id) + " out of range at level " +
                             std::to_string(level));
}

int Taxonomy::class_count(std::size_t level) const {
  check_level(level);
  return static_cast<int>(levels_[level].class_names.size());
}

std::vector<int> Taxonomy::level_sizes() const {
  std::vector<int> sizes;
  for (const Level& level : levels_) sizes.push_back(static_cast<int>(level.class_names.size()));
  return sizes;
}

const std::string& Taxonomy::level_name(std::size_t level) const {
  check_level(level);
  return levels_[level].name;
}

const std::string& Taxonomy::class_name(std::size_t level, int id) const {
  check_id(level, id);
  return levels_[level].class_names[id];
}

int Taxonomy::parent_of(std::size_t level, int id) const {
  check_id(level, id);
  if (level == 0) fail("bad_level", "level 0 classes have no parent");
  return levels_[level].parent[id];
}

std::vector<int> Taxonomy::siblings(std::size_t level, int id) const {
  check_id(level, id);
  std::vector<int> out;
  if (level == 0) {
    for (int c = 0; c < class_count(0); ++c)
      if (c != id) out.push_back(c);
    return out;
  }
  int parent = levels_[level].parent[id];
  for (int c : levels_[level - 1].children[parent])
    if (c != id) out.push_back(c);
  return out;
}

bool Taxonomy::is_valid_path(const LabelPath& path) const {
  if (path.size() != levels_.size())
    fail("bad_path", "path length does not match level count");
  for (std::size_t l = 0; l < path.size(); ++l) check_id(l, path[l]);
  for (std::size_t l = 1; l < path.size(); ++l)
    if (levels_[l].parent[path[l]] != path[l - 1]) return false;
  return true;
}

LabelPath Taxonomy::ancestor_path(int leaf_id) const {
  std::size_t last = levels_.size() - 1;
  check_id(last, leaf_id);
  LabelPath path(levels_.size());
  path[last] = leaf_id;
  for (std::size_t l = last; l > 0; --l) path[l - 1] = levels_[l].parent[path[l]];
  return path;
}

}  // namespace hierloss
