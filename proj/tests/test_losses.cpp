#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "hierloss/losses.hpp"

using namespace hierloss;

namespace {

HierLogits random_logits(const Taxonomy& tax, std::mt19937_64& rng, double tau = 0.07) {
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  HierLogits hl;
  hl.tau = tau;
  for (std::size_t l = 0; l < tax.level_count(); ++l) {
    std::vector<double> z(tax.class_count(l));
    for (double& v : z) v = unif(rng);
    hl.z.push_back(std::move(z));
  }
  return hl;
}

std::vector<SmoothingTable> tables_for(const Taxonomy& tax, double epsilon) {
  std::vector<SmoothingTable> tables;
  for (std::size_t l = 0; l < tax.level_count(); ++l)
    tables.push_back(build_smoothing_table(tax, l, epsilon));
  return tables;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("smoothing table structure") {
  for (const Taxonomy& tax :
       {two_parent_tree(), only_child_tree(), Taxonomy::balanced({4}), Taxonomy::balanced({2, 3, 2})}) {
    for (double eps : {0.0, 0.05, 0.3, 0.9}) {
      for (std::size_t l = 0; l < tax.level_count(); ++l) {
        SmoothingTable table = build_smoothing_table(tax, l, eps);
        const int n = tax.class_count(l);
        REQUIRE(table.t.rows == static_cast<std::size_t>(n));
        REQUIRE(table.t.cols == static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          auto sibs = tax.siblings(l, i);
          double row_sum = 0.0;
          for (int j = 0; j < n; ++j) {
            double v = table.t(i, j);
            CHECK(v >= 0.0);
            row_sum += v;
            bool in_support = (j == i) ||
                std::find(sibs.begin(), sibs.end(), j) != sibs.end();
            if (!in_support) CHECK(v == 0.0);
          }
          CHECK(std::abs(row_sum - 1.0) < 1e-12);
          if (sibs.empty()) {
            CHECK(table.t(i, i) == 1.0);
          } else {
            CHECK(table.t(i, i) == doctest::Approx(1.0 - eps).epsilon(1e-15));
            for (int s : sibs)
              CHECK(table.t(i, s) ==
                    doctest::Approx(eps / static_cast<double>(sibs.size())).epsilon(1e-13));
          }
        }
      }
    }
  }
}

TEST_CASE("smoothing epsilon range") {
  Taxonomy tax = Taxonomy::balanced({2, 2});
  CHECK(error_code_of([&] { build_smoothing_table(tax, 0, -0.1); }) == "bad_epsilon");
  CHECK(error_code_of([&] { build_smoothing_table(tax, 0, 1.0); }) == "bad_epsilon");
  CHECK(error_code_of([&] { build_smoothing_table(tax, 9, 0.1); }) == "bad_level");
}

TEST_CASE("smoothed CE with epsilon zero equals plain CE bitwise") {
  std::mt19937_64 rng(21);
  Taxonomy tax = two_parent_tree();
  auto tables = tables_for(tax, 0.0);
  for (int rep = 0; rep < 20; ++rep) {
    HierLogits hl = random_logits(tax, rng);
    for (std::size_t l = 0; l < tax.level_count(); ++l) {
      for (int i = 0; i < tax.class_count(l); ++i) {
        LossResult smoothed = hisce_loss(hl.z[l], tables[l].t.row(i));
        LossResult plain = ce_loss(hl.z[l], i);
        CHECK(smoothed.value == plain.value);
        REQUIRE(smoothed.grad.size() == plain.grad.size());
        for (std::size_t j = 0; j < plain.grad.size(); ++j)
          CHECK(smoothed.grad[j] == plain.grad[j]);
      }
    }
  }
}

TEST_CASE("uniform logits give log of class count") {
  // Any row-stochastic target against a flat 3-way softmax costs exactly ln 3.
  std::vector<double> flat(3, 0.4);
  CHECK(ce_loss(flat, 1).value == doctest::Approx(1.0986122886681098).epsilon(1e-15));
  std::vector<double> target{0.8, 0.15, 0.05};
  CHECK(hisce_loss(flat, target).value ==
        doctest::Approx(1.0986122886681098).epsilon(1e-15));
}

TEST_CASE("ce gradient is softmax minus one-hot") {
  std::vector<double> z{0.3, -1.2, 0.7, 0.1};
  LossResult r = ce_loss(z, 2);
  double sum = 0.0;
  for (double g : r.grad) sum += g;
  CHECK(std::abs(sum) < 1e-14);
  CHECK(r.grad[2] < 0.0);
  for (int j : {0, 1, 3}) CHECK(r.grad[j] > 0.0);
}

TEST_CASE("path KL on uniform logits") {
  // Two levels of two classes each, all scores equal: both normalizations
  // produce the uniform concatenated distribution, and KL against the scaled
  // one-hot target is exactly ln 2.
  Taxonomy tax = Taxonomy::balanced({2, 2});
  HierLogits hl;
  hl.tau = 0.07;
  hl.z = {{0.5, 0.5}, {0.5, 0.5}};
  LabelPath path{0, 1};
  for (TpklMode mode : {TpklMode::kPerLevel, TpklMode::kGlobal}) {
    HierLossResult r = tp_kl_loss(hl, path, mode);
    CHECK(r.value == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  }
}

TEST_CASE("per-level path KL equals mean of per-level CE") {
  std::mt19937_64 rng(33);
  Taxonomy tax = two_parent_tree();
  const double L = static_cast<double>(tax.level_count());
  for (int rep = 0; rep < 30; ++rep) {
    HierLogits hl = random_logits(tax, rng, 0.07);
    LabelPath path = tax.ancestor_path(static_cast<int>(rng() % 5));
    HierLossResult kl = tp_kl_loss(hl, path, TpklMode::kPerLevel);
    double ce_sum = 0.0;
    for (std::size_t l = 0; l < hl.z.size(); ++l) {
      std::vector<double> u(hl.z[l].size());
      for (std::size_t j = 0; j < u.size(); ++j) u[j] = hl.z[l][j] / hl.tau;
      ce_sum += ce_loss(u, path[l]).value;
    }
    CHECK(rel_err(kl.value, ce_sum / L) < 1e-14);
  }
}

TEST_CASE("path KL vanishes at a large margin") {
  Taxonomy tax = Taxonomy::balanced({3, 2});
  const double tau = 0.07;
  HierLogits hl;
  hl.tau = tau;
  LabelPath path{1, 3};
  for (std::size_t l = 0; l < tax.level_count(); ++l) {
    std::vector<double> z(tax.class_count(l), 0.0);
    z[path[l]] = 40.0 * tau;  // margin of 40 tau over every rival
    hl.z.push_back(std::move(z));
  }
  HierLossResult r = tp_kl_loss(hl, path, TpklMode::kPerLevel);
  CHECK(r.value >= 0.0);
  CHECK(r.value < 1e-6);
}

TEST_CASE("path target layout") {
  auto target = path_target({2, 3}, {1, 2});
  REQUIRE(target.size() == 5);
  CHECK(target == std::vector<double>{0.0, 0.5, 0.0, 0.0, 0.5});
}

TEST_CASE("total loss reductions are bitwise") {
  std::mt19937_64 rng(44);
  Taxonomy tax = two_parent_tree();
  auto tables = tables_for(tax, 0.15);
  for (int rep = 0; rep < 20; ++rep) {
    HierLogits hl = random_logits(tax, rng);
    LabelPath path = tax.ancestor_path(static_cast<int>(rng() % 5));

    // Both structural weights zero: the total must be exactly the summed
    // per-level CE on the tempered scores, not merely close to it.
    TotalLossResult ce_only = total_loss(hl, path, tables, {0.0, 0.0});
    double ce_ref = 0.0;
    for (std::size_t l = 0; l < hl.z.size(); ++l) {
      std::vector<double> u(hl.z[l].size());
      for (std::size_t j = 0; j < u.size(); ++j) u[j] = hl.z[l][j] / hl.tau;
      ce_ref += ce_loss(u, path[l]).value;
    }
    CHECK(ce_only.total == ce_ref);
    CHECK(ce_only.tpkl == 0.0);
    CHECK(ce_only.hisce == 0.0);

    // Dropping only the smoothing term leaves CE + lambda1 * KL exactly.
    TotalLossResult no_smooth = total_loss(hl, path, tables, {0.7, 0.0});
    CHECK(no_smooth.total == no_smooth.ce + 0.7 * no_smooth.tpkl);
    CHECK(no_smooth.ce == ce_only.ce);
  }
}

TEST_CASE("total loss gradient is linear in the weights") {
  std::mt19937_64 rng(55);
  Taxonomy tax = two_parent_tree();
  auto tables = tables_for(tax, 0.1);
  HierLogits hl = random_logits(tax, rng);
  LabelPath path{1, 4};

  TotalLossResult base = total_loss(hl, path, tables, {0.0, 0.0});
  TotalLossResult kl_only = combined_loss(hl, path, tables, {1.0, 0.0}, false,
                                          TpklMode::kGlobal);
  TotalLossResult smooth_only = combined_loss(hl, path, tables, {0.0, 1.0}, false,
                                              TpklMode::kGlobal);
  TotalLossResult joint = total_loss(hl, path, tables, {2.0, 0.5});

  CHECK(rel_err(joint.total,
                base.total + 2.0 * kl_only.total + 0.5 * smooth_only.total) < 1e-13);
  for (std::size_t l = 0; l < hl.z.size(); ++l)
    for (std::size_t j = 0; j < hl.z[l].size(); ++j) {
      double expect = base.grad[l][j] + 2.0 * kl_only.grad[l][j] +
                      0.5 * smooth_only.grad[l][j];
      CHECK(rel_err(joint.grad[l][j], expect) < 1e-12);
    }
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(66);
  Taxonomy tax = two_parent_tree();
  auto tables = tables_for(tax, 0.2);
  const double h = 1e-6;
  for (TpklMode mode : {TpklMode::kPerLevel, TpklMode::kGlobal}) {
    HierLogits hl = random_logits(tax, rng, 0.3);
    LabelPath path{0, 2};
    TotalLossResult r = combined_loss(hl, path, tables, {1.3, 0.6}, true, mode);
    for (std::size_t l = 0; l < hl.z.size(); ++l)
      for (std::size_t j = 0; j < hl.z[l].size(); ++j) {
        HierLogits plus = hl, minus = hl;
        plus.z[l][j] += h;
        minus.z[l][j] -= h;
        double fd = (combined_loss(plus, path, tables, {1.3, 0.6}, true, mode).total -
                     combined_loss(minus, path, tables, {1.3, 0.6}, true, mode).total) /
                    (2 * h);
        CHECK(rel_err(r.grad[l][j], fd) < 1e-7);
      }
  }
}

TEST_CASE("mode names round trip") {
  CHECK(tpkl_mode_from_string("per-level") == TpklMode::kPerLevel);
  CHECK(tpkl_mode_from_string("global") == TpklMode::kGlobal);
  CHECK(to_string(TpklMode::kPerLevel) == "per-level");
  CHECK(to_string(TpklMode::kGlobal) == "global");
  CHECK(error_code_of([] { tpkl_mode_from_string("sideways"); }) == "bad_config");
}

TEST_SUITE_END();
