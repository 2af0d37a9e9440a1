#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hierloss/error.hpp"
#include "hierloss/taxonomy.hpp"

// Two coarse classes with 3 + 2 children; the smallest tree where sibling sets
// differ per parent and cross-parent fine predictions are invalid paths.
inline hierloss::Taxonomy two_parent_tree() {
  return hierloss::Taxonomy::from_json(nlohmann::json::parse(R"({
    "levels": [
      {"name": "coarse", "classes": [{"name": "top_a"}, {"name": "top_b"}]},
      {"name": "fine", "classes": [
        {"name": "b", "parent": "top_a"},
        {"name": "c", "parent": "top_a"},
        {"name": "d", "parent": "top_a"},
        {"name": "f", "parent": "top_b"},
        {"name": "g", "parent": "top_b"}]}
    ]})"));
}

// "solo" is its parent's only child: its sibling set is empty.
inline hierloss::Taxonomy only_child_tree() {
  return hierloss::Taxonomy::from_json(nlohmann::json::parse(R"({
    "levels": [
      {"name": "coarse", "classes": [{"name": "wide"}, {"name": "narrow"}]},
      {"name": "fine", "classes": [
        {"name": "solo", "parent": "wide"},
        {"name": "n1", "parent": "narrow"},
        {"name": "n2", "parent": "narrow"}]}
    ]})"));
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

template <typename F>
std::string error_code_of(F&& fn) {
  try {
    fn();
  } catch (const hierloss::Error& e) {
    return e.code();
  }
  return "";
}

inline std::string test_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "hierloss_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}
