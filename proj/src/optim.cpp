#include "hierloss/optim.hpp"

#include <cmath>

#include "hierloss/error.hpp"

namespace hierloss {

Optimizer Optimizer::make(const std::string& name, double lr, double weight_decay,
                          const AdapterState& state) {
  Optimizer opt;
  if (name == "adamw")
    opt.kind = Kind::kAdamW;
  else if (name == "sgd")
    opt.kind = Kind::kSgd;
  else
    fail("bad_config", "unknown optimizer '" + name + "' (expected 'adamw' or 'sgd')");
  opt.lr = lr;
  opt.weight_decay = weight_decay;
  opt.m_a = Matrix(state.a.rows, state.a.cols);
  opt.v_a = Matrix(state.a.rows, state.a.cols);
  opt.m_b = Matrix(state.b.rows, state.b.cols);
  opt.v_b = Matrix(state.b.rows, state.b.cols);
  return opt;
}

void Optimizer::step(AdapterState& state, const AdapterGrad& grad, double grad_scale) {
  ++step_count;
  auto update = [&](Matrix& param, const Matrix& g, Matrix& m, Matrix& v) {
    if (kind == Kind::kSgd) {
      for (std::size_t i = 0; i < param.data.size(); ++i)
        param.data[i] -= lr * (grad_scale * g.data[i] + weight_decay * param.data[i]);
      return;
    }
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      double gi = grad_scale * g.data[i];
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      param.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * param.data[i]);
    }
  };
  update(state.a, grad.a, m_a, v_a);
  update(state.b, grad.b, m_b, v_b);
}

}  // namespace hierloss
