#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "hierloss/metrics.hpp"

using namespace hierloss;

namespace {

PredictionSet random_preds(const Taxonomy& tax, std::size_t n, std::mt19937_64& rng) {
  PredictionSet ps;
  ps.n = n;
  ps.levels = tax.level_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < ps.levels; ++l) {
      ps.pred.push_back(static_cast<int>(rng() % tax.class_count(l)));
      // ground truth must be a real path; draw a leaf and expand it
    }
    LabelPath truth = tax.ancestor_path(
        static_cast<int>(rng() % tax.class_count(tax.level_count() - 1)));
    ps.truth.insert(ps.truth.end(), truth.begin(), truth.end());
  }
  return ps;
}

// Straight recount of every metric, written without reusing library internals.
struct Recount {
  std::vector<double> acc;
  double wap = 0.0, tice = 0.0, fpa = 0.0;
};

Recount recount(const PredictionSet& ps, const Taxonomy& tax) {
  Recount rc;
  rc.acc.assign(ps.levels, 0.0);
  std::size_t exact = 0, invalid = 0;
  for (std::size_t i = 0; i < ps.n; ++i) {
    bool all = true;
    for (std::size_t l = 0; l < ps.levels; ++l) {
      if (ps.pred_at(i, l) == ps.truth_at(i, l)) rc.acc[l] += 1.0;
      else all = false;
    }
    if (all) ++exact;
    bool valid = true;
    for (std::size_t l = 1; l < ps.levels; ++l)
      if (tax.parent_of(l, ps.pred_at(i, l)) != ps.pred_at(i, l - 1)) valid = false;
    if (!valid) ++invalid;
  }
  for (double& a : rc.acc) a /= static_cast<double>(ps.n);
  rc.fpa = static_cast<double>(exact) / static_cast<double>(ps.n);
  rc.tice = static_cast<double>(invalid) / static_cast<double>(ps.n);

  double weight_sum = 0.0;
  for (std::size_t l = 0; l < ps.levels; ++l) weight_sum += tax.class_count(l);
  for (std::size_t l = 0; l < ps.levels; ++l) {
    int classes = tax.class_count(l);
    double macro = 0.0;
    for (int c = 0; c < classes; ++c) {
      std::size_t tp = 0, predicted = 0;
      for (std::size_t i = 0; i < ps.n; ++i) {
        if (ps.pred_at(i, l) != c) continue;
        ++predicted;
        if (ps.truth_at(i, l) == c) ++tp;
      }
      if (predicted > 0)
        macro += static_cast<double>(tp) / static_cast<double>(predicted);
    }
    macro /= static_cast<double>(classes);
    rc.wap += (static_cast<double>(classes) / weight_sum) * macro;
  }
  return rc;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("metrics agree with a straight recount") {
  std::mt19937_64 rng(97);
  for (const Taxonomy& tax : {two_parent_tree(), Taxonomy::balanced({3, 2, 2})}) {
    for (int rep = 0; rep < 25; ++rep) {
      PredictionSet ps = random_preds(tax, 20, rng);
      EvalReport report = evaluate(ps, tax);
      Recount rc = recount(ps, tax);
      REQUIRE(report.per_level_accuracy.size() == ps.levels);
      for (std::size_t l = 0; l < ps.levels; ++l)
        CHECK(report.per_level_accuracy[l] == doctest::Approx(rc.acc[l]).epsilon(1e-14));
      CHECK(report.fpa == doctest::Approx(rc.fpa).epsilon(1e-14));
      CHECK(report.tice == doctest::Approx(rc.tice).epsilon(1e-14));
      CHECK(report.wap == doctest::Approx(rc.wap).epsilon(1e-12));
      double min_acc = *std::min_element(report.per_level_accuracy.begin(),
                                         report.per_level_accuracy.end());
      CHECK(report.fpa <= min_acc + 1e-15);
      CHECK(report.invalid_paths ==
            static_cast<std::size_t>(std::lround(rc.tice * static_cast<double>(ps.n))));
    }
  }
}

TEST_CASE("expanded leaf predictions never break the tree") {
  std::mt19937_64 rng(13);
  Taxonomy tax = Taxonomy::balanced({2, 3, 2});
  PredictionSet ps;
  ps.n = 30;
  ps.levels = tax.level_count();
  int leaves = tax.class_count(2);
  for (std::size_t i = 0; i < ps.n; ++i) {
    LabelPath pred = tax.ancestor_path(static_cast<int>(rng() % leaves));
    LabelPath truth = tax.ancestor_path(static_cast<int>(rng() % leaves));
    ps.pred.insert(ps.pred.end(), pred.begin(), pred.end());
    ps.truth.insert(ps.truth.end(), truth.begin(), truth.end());
  }
  CHECK(tice(ps, tax) == 0.0);
  CHECK(evaluate(ps, tax).invalid_paths == 0);
}

TEST_CASE("cross-parent predictions are counted as invalid") {
  Taxonomy tax = two_parent_tree();
  PredictionSet ps;
  ps.n = 4;
  ps.levels = 2;
  // two consistent rows, two rows pairing the wrong coarse class
  ps.pred = {0, 0, 1, 3, 1, 0, 0, 4};
  ps.truth = {0, 0, 1, 3, 0, 0, 1, 4};
  CHECK(tice(ps, tax) == 0.5);
  CHECK(fpa(ps) == 0.5);
}

TEST_CASE("weighted precision uses level sizes as weights") {
  // Three levels sized 13 / 38 / 200. Predictions are perfect at the first
  // level and always wrong at the others, where only class 0 is ever
  // predicted, so only the first level's macro precision is nonzero.
  nlohmann::json doc;
  doc["levels"] = nlohmann::json::array();
  std::vector<int> sizes{13, 38, 200};
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    nlohmann::json level;
    level["name"] = "lvl" + std::to_string(l);
    level["classes"] = nlohmann::json::array();
    for (int c = 0; c < sizes[l]; ++c) {
      nlohmann::json cls;
      cls["name"] = "c" + std::to_string(l) + "_" + std::to_string(c);
      if (l > 0) cls["parent"] = "c" + std::to_string(l - 1) + "_0";
      level["classes"].push_back(cls);
    }
    doc["levels"].push_back(level);
  }
  Taxonomy tax = Taxonomy::from_json(doc);

  PredictionSet ps;
  ps.n = 13;
  ps.levels = 3;
  for (int i = 0; i < 13; ++i) {
    ps.pred.insert(ps.pred.end(), {i, 0, 0});
    ps.truth.insert(ps.truth.end(), {i, 1, 1});
  }
  // first level: all 13 classes predicted once, each correct -> macro 1.
  // deeper levels: only class 0 predicted, never correct -> macro 0.
  CHECK(weighted_ap(ps, tax) == doctest::Approx(13.0 / 251.0).epsilon(1e-14));

  // flip the deep truths to hit: now class 0 at levels 2-3 has precision 1,
  // giving macro 1/38 and 1/200 there.
  for (int i = 0; i < 13; ++i) {
    ps.truth[i * 3 + 1] = 0;
    ps.truth[i * 3 + 2] = 0;
  }
  double expect = (13.0 / 251.0) * 1.0 + (38.0 / 251.0) * (1.0 / 38.0) +
                  (200.0 / 251.0) * (1.0 / 200.0);
  CHECK(weighted_ap(ps, tax) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("exact-path accuracy needs every level right") {
  Taxonomy tax = two_parent_tree();
  PredictionSet ps;
  ps.n = 3;
  ps.levels = 2;
  ps.pred = {0, 1, 1, 3, 0, 0};
  ps.truth = {0, 1, 1, 4, 1, 0};
  // row 0 fully right; row 1 right only coarse; row 2 right only fine
  CHECK(fpa(ps) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto acc = level_accuracy(ps);
  CHECK(acc[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(acc[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(macro_accuracy(ps) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("predictions csv round trip") {
  PredictionSet ps;
  ps.n = 3;
  ps.levels = 2;
  ps.pred = {0, 1, 1, 3, 0, 2};
  ps.truth = {0, 1, 1, 4, 1, 2};
  std::string path = test_path("preds_roundtrip.csv");
  save_predictions_csv(path, ps);
  PredictionSet back = load_predictions_csv(path);
  CHECK(back.n == ps.n);
  CHECK(back.levels == ps.levels);
  CHECK(back.pred == ps.pred);
  CHECK(back.truth == ps.truth);
}

TEST_CASE("malformed prediction files") {
  CHECK(error_code_of([] { load_predictions_csv(test_path("no_such.csv")); }) ==
        "missing_file");
  std::string garbled = test_path("preds_garbled.csv");
  {
    std::ofstream out(garbled);
    out << "sample_id,pred_1,true_1\n0,apple,1\n";
  }
  CHECK(error_code_of([&] { load_predictions_csv(garbled); }) == "bad_predictions");
  std::string headerless = test_path("preds_headerless.csv");
  {
    std::ofstream out(headerless);
    out << "0,1,1\n";
  }
  CHECK(error_code_of([&] { load_predictions_csv(headerless); }) == "bad_predictions");
}

TEST_CASE("empty prediction sets are rejected") {
  Taxonomy tax = two_parent_tree();
  PredictionSet ps;
  ps.levels = 2;
  CHECK(error_code_of([&] { evaluate(ps, tax); }) == "empty_set");
}

TEST_SUITE_END();
