#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace hierloss {

// One dense class id per level, ordered coarsest -> finest.
using LabelPath = std::vector<int>;

// Immutable multi-level label tree. Level 0 is the coarsest stratum; classes
// at every deeper level name exactly one parent in the level above. All derived
// indexes (children lists, sibling sets) are built eagerly at construction, so
// queries are lock-free reads and the object is safe to share across threads.
class Taxonomy {
 public:
  // Parses the taxonomy document format:
  //   {"levels": [{"name": ..., "classes": [{"name": ..., "parent": ...}]}]}
  // `parent` is required from the second level on and must name a class in the
  // previous level. Dense ids are assigned in file order.
  static Taxonomy from_json(const nlohmann::json& doc);
  static Taxonomy load_file(const std::string& path);

  // Balanced tree from per-level branching factors: level 0 has branching[0]
  // classes, each class at level l has branching[l+1] children.
  static Taxonomy balanced(const std::vector<int>& branching);

  nlohmann::json to_json() const;

  std::size_t level_count() const { return levels_.size(); }
  int class_count(std::size_t level) const;
  int total_classes() const { return total_classes_; }
  std::vector<int> level_sizes() const;

  const std::string& level_name(std::size_t level) const;
  const std::string& class_name(std::size_t level, int id) const;

  // Parent id at level-1. Only valid for level >= 1.
  int parent_of(std::size_t level, int id) const;

  // Classes at `level` sharing the parent of `id`, excluding `id` itself.
  // Level-0 classes are treated as children of an implicit root, so they are
  // all mutual siblings.
  std::vector<int> siblings(std::size_t level, int id) const;

  // True iff each consecutive pair of ids is a parent-child edge.
  bool is_valid_path(const LabelPath& path) const;

  // Root-to-leaf path ending at `leaf_id` on the finest level.
  LabelPath ancestor_path(int leaf_id) const;

 private:
  struct Level {
    std::string name;
    std::vector<std::string> class_names;
    std::vector<int> parent;                 // empty at level 0
    std::vector<std::vector<int>> children;  // ids at level+1; empty at last level
  };

  void check_level(std::size_t level) const;
  void check_id(std::size_t level, int id) const;
  void build_children();

  std::vector<Level> levels_;
  int total_classes_ = 0;
};

}  // namespace hierloss
