#include "hierloss/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hierloss/batch.hpp"
#include "hierloss/losses.hpp"
#include "hierloss/synth.hpp"
#include "hierloss/taxonomy.hpp"

namespace hierloss {

namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

std::vector<int> random_branching(std::mt19937_64& rng) {
  // Shapes are capped at 10 classes per level so every finite-difference
  // sweep touches a bounded number of coordinates.
  std::uniform_int_distribution<int> levels(1, 3);
  switch (levels(rng)) {
    case 1:
      return {std::uniform_int_distribution<int>(2, 10)(rng)};
    case 2: {
      static const std::vector<std::vector<int>> pairs{
          {2, 2}, {2, 3}, {2, 4}, {2, 5}, {3, 2}, {3, 3}, {4, 2}, {5, 2}};
      return pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
    }
    default:
      return {2, 2, 2};
  }
}

LossConfig random_loss_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LossConfig cfg;
  cfg.weights.lambda1 = unit(rng) < 0.25 ? 0.0 : 2.0 * unit(rng);
  cfg.weights.lambda2 = unit(rng) < 0.25 ? 0.0 : 2.0 * unit(rng);
  cfg.include_ce = unit(rng) < 0.8;
  if (!cfg.include_ce && cfg.weights.lambda1 == 0.0 && cfg.weights.lambda2 == 0.0)
    cfg.include_ce = true;
  cfg.tau = 0.05 + 0.95 * unit(rng);
  cfg.mode = unit(rng) < 0.5 ? TpklMode::kPerLevel : TpklMode::kGlobal;
  return cfg;
}

LabelPath random_path(const Taxonomy& tax, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> leaf(0, tax.class_count(tax.level_count() - 1) - 1);
  return tax.ancestor_path(leaf(rng));
}

void audit_loss_instance(std::mt19937_64& rng, GradAuditResult& result) {
  Taxonomy tax = Taxonomy::balanced(random_branching(rng));
  LossConfig cfg = random_loss_config(rng);
  std::uniform_real_distribution<double> eps_dist(0.0, 0.9);
  std::vector<SmoothingTable> tables;
  for (std::size_t l = 0; l < tax.level_count(); ++l)
    tables.push_back(build_smoothing_table(tax, l, eps_dist(rng)));

  HierLogits logits;
  logits.tau = cfg.tau;
  std::uniform_real_distribution<double> score(-3.0, 3.0);
  for (std::size_t l = 0; l < tax.level_count(); ++l) {
    std::vector<double> z(tax.class_count(l));
    for (double& v : z) v = score(rng);
    logits.z.push_back(std::move(z));
  }
  LabelPath path = random_path(tax, rng);

  TotalLossResult analytic =
      combined_loss(logits, path, tables, cfg.weights, cfg.include_ce, cfg.mode);
  const double h = 1e-6;
  for (std::size_t l = 0; l < logits.z.size(); ++l) {
    for (std::size_t i = 0; i < logits.z[l].size(); ++i) {
      double saved = logits.z[l][i];
      logits.z[l][i] = saved + h;
      double up = combined_loss(logits, path, tables, cfg.weights, cfg.include_ce,
                                cfg.mode)
                      .total;
      logits.z[l][i] = saved - h;
      double down = combined_loss(logits, path, tables, cfg.weights, cfg.include_ce,
                                  cfg.mode)
                        .total;
      logits.z[l][i] = saved;
      result.max_rel_loss =
          std::max(result.max_rel_loss,
                   rel_error(analytic.grad[l][i], (up - down) / (2.0 * h)));
    }
  }
  ++result.loss_checks;
}

void audit_adapter_instance(std::mt19937_64& rng, GradAuditResult& result) {
  SynthSpec spec;
  spec.branching = std::uniform_int_distribution<int>(0, 1)(rng) == 0
                       ? std::vector<int>{2, 2}
                       : std::vector<int>{3};
  spec.feature_dim = std::uniform_int_distribution<int>(3, 6)(rng);
  spec.samples_per_leaf = 2;
  spec.spread = 0.4;
  spec.signal = 0.6;
  spec.seed = rng();
  DataBundle data = generate_synthetic(spec);

  std::size_t rank = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
  std::mt19937_64 init_rng(rng());
  AdapterState adapter = AdapterState::init(Matrix::identity(data.dataset.dim()), rank,
                                            2.0 * static_cast<double>(rank), 0.5,
                                            init_rng);
  std::uniform_real_distribution<double> weight(-0.5, 0.5);
  for (double& v : adapter.a.data) v = weight(rng);
  for (double& v : adapter.b.data) v = weight(rng);

  LossConfig cfg = random_loss_config(rng);
  std::uniform_real_distribution<double> eps_dist(0.0, 0.9);
  std::vector<SmoothingTable> tables;
  for (std::size_t l = 0; l < data.taxonomy.level_count(); ++l)
    tables.push_back(build_smoothing_table(data.taxonomy, l, eps_dist(rng)));

  std::uniform_int_distribution<std::size_t> pick(0, data.dataset.n() - 1);
  std::size_t sample = pick(rng);
  BatchResult analytic =
      sample_loss_grad(data.dataset, sample, adapter, data.embeddings, tables, cfg);

  const double h = 1e-5;
  auto fd_check = [&](Matrix& param, const Matrix& grad_mat) {
    for (std::size_t flat = 0; flat < param.data.size(); ++flat) {
      double saved = param.data[flat];
      param.data[flat] = saved + h;
      double up = sample_loss(data.dataset, sample, adapter, data.embeddings, tables, cfg);
      param.data[flat] = saved - h;
      double down =
          sample_loss(data.dataset, sample, adapter, data.embeddings, tables, cfg);
      param.data[flat] = saved;
      result.max_rel_adapter =
          std::max(result.max_rel_adapter,
                   rel_error(grad_mat.data[flat], (up - down) / (2.0 * h)));
    }
  };
  fd_check(adapter.a, analytic.grad.a);
  fd_check(adapter.b, analytic.grad.b);
  ++result.adapter_checks;
}

}  // namespace

GradAuditResult run_gradient_audit(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  GradAuditResult result;
  for (int i = 0; i < instances; ++i) audit_loss_instance(rng, result);
  for (int i = 0; i < instances / 2; ++i) audit_adapter_instance(rng, result);
  return result;
}

}  // namespace hierloss
