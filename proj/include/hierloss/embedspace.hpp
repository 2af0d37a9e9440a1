#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hierloss/matrix.hpp"

namespace hierloss {

// Per-level raw similarity scores for one sample, ordered coarse -> fine,
// plus the softmax temperature applied by the losses.
struct HierLogits {
  std::vector<std::vector<double>> z;
  double tau = 0.07;
};

// Cosine similarity between one vector and every row of `class_embeds`.
// Neither side needs to be pre-normalized; zero-norm inputs are an error.
std::vector<double> cosine_logits(std::span<const double> image_vec,
                                  const Matrix& class_embeds);

// Backward pass of cosine_logits: accumulates d(loss)/d(image_vec) into
// `grad_v` given d(loss)/d(logit_c) for every class row.
void cosine_logits_backward(std::span<const double> image_vec,
                            const Matrix& class_embeds,
                            std::span<const double> grad_logits,
                            std::span<double> grad_v);

// Frozen base weight plus trainable low-rank factors. The effective map is
// W = W0 + (alpha/r) * B * A with W0 d x k, A r x k, B d x r. Only A and B
// receive gradients.
struct AdapterState {
  Matrix w0;
  Matrix a;
  Matrix b;
  double alpha = 32.0;

  std::size_t rank() const { return a.rows; }
  std::size_t out_dim() const { return w0.rows; }
  std::size_t in_dim() const { return w0.cols; }
  double scale() const { return alpha / static_cast<double>(rank()); }
  std::size_t trainable_params() const { return rank() * (out_dim() + in_dim()); }

  Matrix effective_weight() const;

  // A drawn uniform from [-init_scale, init_scale], B zero, so the adapter
  // starts out as exactly W0.
  static AdapterState init(Matrix w0, std::size_t rank, double alpha,
                           double init_scale, std::mt19937_64& rng);
};

std::vector<double> adapter_forward(const AdapterState& state, std::span<const double> x);

struct AdapterGrad {
  Matrix a;
  Matrix b;

  void add_scaled(const AdapterGrad& other, double factor);
};

// d(loss)/dA = (alpha/r) * B^T * upstream * x^T
// d(loss)/dB = (alpha/r) * upstream * (A x)^T
AdapterGrad adapter_grad(const AdapterState& state, std::span<const double> x,
                         std::span<const double> upstream);

}  // namespace hierloss
