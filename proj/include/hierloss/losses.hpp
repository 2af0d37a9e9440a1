#pragma once

#include <span>
#include <vector>

#include "hierloss/embedspace.hpp"
#include "hierloss/matrix.hpp"
#include "hierloss/taxonomy.hpp"

namespace hierloss {

// Per-level row-stochastic target matrix. Row i keeps 1-epsilon on class i and
// spreads epsilon uniformly over its siblings; a class with no siblings keeps
// the full mass so rows always sum to 1.
struct SmoothingTable {
  std::size_t level = 0;
  Matrix t;
  double epsilon = 0.0;
};

SmoothingTable build_smoothing_table(const Taxonomy& taxonomy, std::size_t level,
                                     double epsilon);

struct LossWeights {
  double lambda1 = 0.0;  // tree-path KL weight
  double lambda2 = 0.0;  // sibling-smoothed CE weight
};

// How the concatenated hierarchical distribution is normalized: each level's
// block softmaxed separately and scaled by 1/L, or one softmax over the whole
// concatenation. Per-level is exactly multi-level CE scaled by 1/L (the blocks
// decouple), so training defaults to global, where the levels compete for one
// unit of probability mass and the term does work CE cannot.
enum class TpklMode { kPerLevel, kGlobal };

TpklMode tpkl_mode_from_string(const std::string& s);
std::string to_string(TpklMode mode);

// Concatenated ground-truth path distribution: one block per level
// (coarse -> fine), each block one-hot scaled by 1/L.
std::vector<double> path_target(const std::vector<int>& level_sizes, const LabelPath& path);

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;  // w.r.t. the logits argument
};

// Standard cross-entropy against a single ground-truth index.
LossResult ce_loss(std::span<const double> logits, int truth);

// Cross-entropy against an arbitrary target distribution (one smoothing-table
// row). value = -sum_j target[j] * log softmax(logits)[j]; grad = softmax - target.
LossResult hisce_loss(std::span<const double> logits, std::span<const double> target_row);

struct HierLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad;  // per level, w.r.t. the raw scores z
};

// KL(Y || P) between the ground-truth path distribution and the concatenated
// prediction. Temperature comes from `logits.tau`; gradients chain through it.
HierLossResult tp_kl_loss(const HierLogits& logits, const LabelPath& path,
                          TpklMode mode);

struct TotalLossResult {
  double total = 0.0;
  double ce = 0.0;
  double tpkl = 0.0;
  double hisce = 0.0;
  std::vector<std::vector<double>> grad;  // per level, w.r.t. the raw scores z
};

// CE + lambda1 * TP-KL + lambda2 * HiSCE, all on the same tempered scores.
// `tables` must hold one smoothing table per level whenever lambda2 != 0.
TotalLossResult total_loss(const HierLogits& logits, const LabelPath& path,
                           const std::vector<SmoothingTable>& tables,
                           const LossWeights& weights,
                           TpklMode mode = TpklMode::kGlobal);

// Same combination with the CE term optionally dropped (the pure-TP-KL and
// pure-HiSCE training arms).
TotalLossResult combined_loss(const HierLogits& logits, const LabelPath& path,
                              const std::vector<SmoothingTable>& tables,
                              const LossWeights& weights, bool include_ce,
                              TpklMode mode);

}  // namespace hierloss
