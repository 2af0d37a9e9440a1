#pragma once

#include <string>

#include "hierloss/embedspace.hpp"
#include "hierloss/matrix.hpp"

namespace hierloss {

// Gradient-descent update for the adapter factors. AdamW keeps bias-corrected
// first/second moments and applies decoupled weight decay; the plain SGD
// variant is kept for reference-trajectory comparisons.
struct Optimizer {
  enum class Kind { kAdamW, kSgd };

  Kind kind = Kind::kAdamW;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  long step_count = 0;
  Matrix m_a, v_a, m_b, v_b;

  static Optimizer make(const std::string& name, double lr, double weight_decay,
                        const AdapterState& state);

  // Applies one update using grad * grad_scale (the 1/batch factor).
  void step(AdapterState& state, const AdapterGrad& grad, double grad_scale);
};

}  // namespace hierloss
