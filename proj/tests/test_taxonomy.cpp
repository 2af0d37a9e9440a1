#include "doctest.h"
#include "helpers.hpp"
#include "hierloss/taxonomy.hpp"

using namespace hierloss;

TEST_SUITE_BEGIN("taxonomy");

TEST_CASE("balanced tree shape") {
  Taxonomy tax = Taxonomy::balanced({2, 2, 2});
  CHECK(tax.level_count() == 3);
  CHECK(tax.class_count(0) == 2);
  CHECK(tax.class_count(1) == 4);
  CHECK(tax.class_count(2) == 8);
  CHECK(tax.total_classes() == 14);
  CHECK(tax.level_sizes() == std::vector<int>{2, 4, 8});

  CHECK(tax.parent_of(1, 3) == 1);
  CHECK(tax.parent_of(2, 7) == 3);
  CHECK(tax.ancestor_path(7) == LabelPath{1, 3, 7});
  CHECK(tax.ancestor_path(0) == LabelPath{0, 0, 0});
  CHECK(tax.ancestor_path(5) == LabelPath{1, 2, 5});

  Taxonomy wide = Taxonomy::balanced({3, 3, 3});
  CHECK(wide.level_sizes() == std::vector<int>{3, 9, 27});
  for (int leaf = 0; leaf < 27; ++leaf) CHECK(wide.is_valid_path(wide.ancestor_path(leaf)));
}

TEST_CASE("sibling sets") {
  Taxonomy tax = Taxonomy::balanced({2, 2});
  CHECK(tax.siblings(1, 0) == std::vector<int>{1});
  CHECK(tax.siblings(1, 3) == std::vector<int>{2});
  // first level: every other class counts as a sibling (shared implicit root)
  CHECK(tax.siblings(0, 0) == std::vector<int>{1});

  Taxonomy tree = two_parent_tree();
  CHECK(tree.siblings(1, 0) == std::vector<int>{1, 2});
  CHECK(tree.siblings(1, 1) == std::vector<int>{0, 2});
  CHECK(tree.siblings(1, 3) == std::vector<int>{4});

  CHECK(only_child_tree().siblings(1, 0).empty());
}

TEST_CASE("path validity") {
  Taxonomy tree = two_parent_tree();
  CHECK(tree.is_valid_path({0, 0}));
  CHECK(tree.is_valid_path({0, 2}));
  CHECK(tree.is_valid_path({1, 3}));
  CHECK_FALSE(tree.is_valid_path({1, 0}));
  CHECK_FALSE(tree.is_valid_path({0, 4}));
  CHECK(error_code_of([&] { tree.is_valid_path({0}); }) == "bad_path");
  CHECK(error_code_of([&] { tree.is_valid_path({0, 9}); }) == "bad_class_id");
}

TEST_CASE("names") {
  Taxonomy tree = two_parent_tree();
  CHECK(tree.level_name(0) == "coarse");
  CHECK(tree.class_name(1, 2) == "d");
  CHECK(tree.class_name(0, tree.parent_of(1, 4)) == "top_b");

  Taxonomy bal = Taxonomy::balanced({2, 3});
  CHECK(bal.class_name(0, 1) == "l1_c1");
  CHECK(bal.class_name(1, 5) == "l2_c5");
}

TEST_CASE("json round trip") {
  for (const Taxonomy& original : {two_parent_tree(), Taxonomy::balanced({3, 2})}) {
    Taxonomy copy = Taxonomy::from_json(original.to_json());
    REQUIRE(copy.level_sizes() == original.level_sizes());
    for (std::size_t l = 0; l < original.level_count(); ++l) {
      CHECK(copy.level_name(l) == original.level_name(l));
      for (int c = 0; c < original.class_count(l); ++c) {
        CHECK(copy.class_name(l, c) == original.class_name(l, c));
        if (l > 0) CHECK(copy.parent_of(l, c) == original.parent_of(l, c));
      }
    }
  }
}

TEST_CASE("malformed documents") {
  auto parse = [](const char* text) {
    return [doc = nlohmann::json::parse(text)] { Taxonomy::from_json(doc); };
  };
  CHECK(error_code_of(parse(R"({})")) == "bad_taxonomy");
  CHECK(error_code_of(parse(R"({"levels": []})")) == "bad_taxonomy");
  CHECK(error_code_of(parse(R"({"levels": [{"classes": []}]})")) == "empty_level");
  CHECK(error_code_of(parse(R"({"levels": [{"classes": [
      {"name": "a"}, {"name": "a"}]}]})")) == "duplicate_class");
  CHECK(error_code_of(parse(R"({"levels": [
      {"classes": [{"name": "a"}]},
      {"classes": [{"name": "b"}]}]})")) == "orphan_class");
  CHECK(error_code_of(parse(R"({"levels": [
      {"classes": [{"name": "a"}]},
      {"classes": [{"name": "b", "parent": "zzz"}]}]})")) == "orphan_class");
  CHECK(error_code_of(parse(R"({"levels": [
      {"classes": [{"name": "a", "parent": "x"}]}]})")) == "bad_taxonomy");
}

TEST_CASE("bounds checks") {
  Taxonomy tax = Taxonomy::balanced({2, 2});
  CHECK(error_code_of([&] { tax.class_count(5); }) == "bad_level");
  CHECK(error_code_of([&] { tax.parent_of(1, 99); }) == "bad_class_id");
  CHECK(error_code_of([&] { tax.parent_of(0, 0); }) == "bad_level");
  CHECK(error_code_of([&] { Taxonomy::balanced({}); }) == "bad_taxonomy");
  CHECK(error_code_of([&] { Taxonomy::balanced({2, 0}); }) == "bad_taxonomy");
}

TEST_SUITE_END();
