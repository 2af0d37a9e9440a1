#include "hierloss/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hierloss/error.hpp"

namespace hierloss {

namespace {

struct SoftmaxStats {
  std::vector<double> prob;
  std::vector<double> logprob;
};

SoftmaxStats softmax_stats(std::span<const double> logits) {
  double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  SoftmaxStats st;
  st.prob.resize(logits.size());
  st.logprob.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    st.prob[i] = std::exp(logits[i] - hi);
    sum += st.prob[i];
  }
  double logsum = std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    st.logprob[i] = logits[i] - hi - logsum;
    st.prob[i] /= sum;
  }
  return st;
}

void check_finite(std::span<const double> logits) {
  for (double v : logits)
    if (!std::isfinite(v)) fail("nonfinite_logits", "logits contain NaN or Inf");
}

void check_hier_logits(const HierLogits& logits, const LabelPath& path) {
  if (logits.z.empty()) fail("empty_levels", "hierarchical logits have no levels");
  if (path.size() != logits.z.size())
    fail("shape_mismatch", "path length does not match number of levels");
  if (!(logits.tau > 0.0)) fail("bad_config", "temperature must be positive");
  for (std::size_t l = 0; l < logits.z.size(); ++l) {
    if (logits.z[l].empty()) fail("empty_levels", "level " + std::to_string(l) + " has no logits");
    check_finite(logits.z[l]);
    if (path[l] < 0 || path[l] >= static_cast<int>(logits.z[l].size()))
      fail("bad_class_id", "path id out of range at level " + std::to_string(l));
  }
}

std::vector<double> tempered(std::span<const double> z, double tau) {
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = z[i] / tau;
  return u;
}

}  // namespace

SmoothingTable build_smoothing_table(const Taxonomy& taxonomy, std::size_t level,
                                     double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    fail("bad_epsilon", "epsilon must lie in [0, 1)");
  int n = taxonomy.class_count(level);
  SmoothingTable table;
  table.level = level;
  table.epsilon = epsilon;
  table.t = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> sibs = taxonomy.siblings(level, i);
    if (sibs.empty()) {
      table.t(i, i) = 1.0;
      continue;
    }
    table.t(i, i) = 1.0 - epsilon;
    double share = epsilon / static_cast<double>(sibs.size());
    for (int j : sibs) table.t(i, j) = share;
  }
  return table;
}

TpklMode tpkl_mode_from_string(const std::string& s) {
  if (s == "per-level") return TpklMode::kPerLevel;
  if (s == "global") return TpklMode::kGlobal;
  fail("bad_config", "unknown tpkl_mode '" + s + "' (expected 'per-level' or 'global')");
}

std::string to_string(TpklMode mode) {
  return mode == TpklMode::kPerLevel ? "per-level" : "global";
}

std::vector<double> path_target(const std::vector<int>& level_sizes, const LabelPath& path) {
  if (path.size() != level_sizes.size())
    fail("shape_mismatch", "path length does not match number of levels");
  std::size_t total = 0;
  for (int c : level_sizes) total += static_cast<std::size_t>(c);
  std::vector<double> y(total, 0.0);
  double mass = 1.0 / static_cast<double>(path.size());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < path.size(); ++l) {
    if (path[l] < 0 || path[l] >= level_sizes[l])
      fail("bad_class_id", "path id out of range at level " + std::to_string(l));
    y[offset + static_cast<std::size_t>(path[l])] = mass;
    offset += static_cast<std::size_t>(level_sizes[l]);
  }
  return y;
}

LossResult ce_loss(std::span<const double> logits, int truth) {
  check_finite(logits);
  if (truth < 0 || truth >= static_cast<int>(logits.size()))
    fail("bad_class_id", "ground-truth index out of range");
  SoftmaxStats st = softmax_stats(logits);
  LossResult res;
  res.value = -st.logprob[truth];
  res.grad = std::move(st.prob);
  res.grad[truth] -= 1.0;
  return res;
}

LossResult hisce_loss(std::span<const double> logits, std::span<const double> target_row) {
  check_finite(logits);
  if (logits.size() != target_row.size())
    fail("shape_mismatch", "logits and target row have different lengths");
  SoftmaxStats st = softmax_stats(logits);
  LossResult res;
  for (std::size_t j = 0; j < target_row.size(); ++j)
    if (target_row[j] != 0.0) res.value -= target_row[j] * st.logprob[j];
  res.grad = std::move(st.prob);
  for (std::size_t j = 0; j < target_row.size(); ++j) res.grad[j] -= target_row[j];
  return res;
}

HierLossResult tp_kl_loss(const HierLogits& logits, const LabelPath& path, TpklMode mode) {
  check_hier_logits(logits, path);
  std::size_t levels = logits.z.size();
  double inv_l = 1.0 / static_cast<double>(levels);
  HierLossResult res;
  res.grad.resize(levels);

  if (mode == TpklMode::kPerLevel) {
    // Each block of P is (1/L) * softmax(z_l / tau); the log(1/L) factors in
    // KL(Y || P) cancel, leaving (1/L) * sum_l -log softmax[y_l].
    for (std::size_t l = 0; l < levels; ++l) {
      std::vector<double> u = tempered(logits.z[l], logits.tau);
      SoftmaxStats st = softmax_stats(u);
      res.value += inv_l * -st.logprob[path[l]];
      res.grad[l] = std::move(st.prob);
      res.grad[l][path[l]] -= 1.0;
      for (double& g : res.grad[l]) g *= inv_l / logits.tau;
    }
    return res;
  }

  // Global mode: one softmax over the whole concatenation. The gradient with
  // respect to the concatenated tempered scores is P - Y.
  std::vector<double> u;
  for (std::size_t l = 0; l < levels; ++l) {
    std::vector<double> ul = tempered(logits.z[l], logits.tau);
    u.insert(u.end(), ul.begin(), ul.end());
  }
  SoftmaxStats st = softmax_stats(u);
  std::size_t offset = 0;
  double log_inv_l = std::log(inv_l);
  for (std::size_t l = 0; l < levels; ++l) {
    std::size_t truth = offset + static_cast<std::size_t>(path[l]);
    res.value += inv_l * (log_inv_l - st.logprob[truth]);
    res.grad[l].assign(st.prob.begin() + offset,
                       st.prob.begin() + offset + logits.z[l].size());
    res.grad[l][path[l]] -= inv_l;
    for (double& g : res.grad[l]) g /= logits.tau;
    offset += logits.z[l].size();
  }
  return res;
}

TotalLossResult combined_loss(const HierLogits& logits, const LabelPath& path,
                              const std::vector<SmoothingTable>& tables,
                              const LossWeights& weights, bool include_ce,
                              TpklMode mode) {
  check_hier_logits(logits, path);
  if (!(weights.lambda1 >= 0.0) || !(weights.lambda2 >= 0.0) ||
      !std::isfinite(weights.lambda1) || !std::isfinite(weights.lambda2))
    fail("bad_config", "loss weights must be finite and nonnegative");
  std::size_t levels = logits.z.size();
  bool use_hisce = weights.lambda2 != 0.0;
  if (use_hisce && tables.size() != levels)
    fail("shape_mismatch", "need one smoothing table per level");

  TotalLossResult res;
  res.grad.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) res.grad[l].assign(logits.z[l].size(), 0.0);

  for (std::size_t l = 0; l < levels; ++l) {
    std::vector<double> u = tempered(logits.z[l], logits.tau);
    if (include_ce) {
      LossResult ce = ce_loss(u, path[l]);
      res.ce += ce.value;
      for (std::size_t j = 0; j < u.size(); ++j)
        res.grad[l][j] += ce.grad[j] / logits.tau;
    }
    if (use_hisce) {
      if (tables[l].t.rows != u.size())
        fail("shape_mismatch", "smoothing table size does not match level " + std::to_string(l));
      LossResult h = hisce_loss(u, tables[l].t.row(path[l]));
      res.hisce += h.value;
      for (std::size_t j = 0; j < u.size(); ++j)
        res.grad[l][j] += weights.lambda2 * h.grad[j] / logits.tau;
    }
  }

  if (weights.lambda1 != 0.0) {
    HierLossResult kl = tp_kl_loss(logits, path, mode);
    res.tpkl = kl.value;
    for (std::size_t l = 0; l < levels; ++l)
      for (std::size_t j = 0; j < kl.grad[l].size(); ++j)
        res.grad[l][j] += weights.lambda1 * kl.grad[l][j];
  }

  res.total = res.ce + weights.lambda1 * res.tpkl + weights.lambda2 * res.hisce;
  return res;
}

TotalLossResult total_loss(const HierLogits& logits, const LabelPath& path,
                           const std::vector<SmoothingTable>& tables,
                           const LossWeights& weights, TpklMode mode) {
  return combined_loss(logits, path, tables, weights, /*include_ce=*/true, mode);
}

}  // namespace hierloss
