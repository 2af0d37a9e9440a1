#include "hierloss/embedspace.hpp"

#include <cmath>

#include "hierloss/error.hpp"

namespace hierloss {

std::vector<double> cosine_logits(std::span<const double> image_vec,
                                  const Matrix& class_embeds) {
  if (image_vec.size() != class_embeds.cols)
    fail("dim_mismatch", "image vector length does not match class embedding dim");
  double vn = norm2(image_vec);
  if (vn == 0.0) fail("zero_vector", "image vector has zero norm");

  std::vector<double> out(class_embeds.rows);
  for (std::size_t c = 0; c < class_embeds.rows; ++c) {
    auto t = class_embeds.row(c);
    double tn = norm2(t);
    if (tn == 0.0)
      fail("zero_vector", "class embedding row " + std::to_string(c) + " has zero norm");
    out[c] = dot(image_vec, t) / (vn * tn);
  }
  return out;
}

void cosine_logits_backward(std::span<const double> image_vec,
                            const Matrix& class_embeds,
                            std::span<const double> grad_logits,
                            std::span<double> grad_v) {
  if (grad_logits.size() != class_embeds.rows || grad_v.size() != image_vec.size())
    fail("dim_mismatch", "cosine backward: inconsistent shapes");
  double vn = norm2(image_vec);
  if (vn == 0.0) fail("zero_vector", "image vector has zero norm");

  // z_c = vhat . that_c, so dz_c/dv = (that_c - z_c * vhat) / |v|.
  std::size_t dim = image_vec.size();
  std::vector<double> acc(dim, 0.0);
  double proj = 0.0;  // sum_c g_c * z_c
  for (std::size_t c = 0; c < class_embeds.rows; ++c) {
    auto t = class_embeds.row(c);
    double tn = norm2(t);
    if (tn == 0.0)
      fail("zero_vector", "class embedding row " + std::to_string(c) + " has zero norm");
    double z = dot(image_vec, t) / (vn * tn);
    double g = grad_logits[c];
    for (std::size_t j = 0; j < dim; ++j) acc[j] += g * t[j] / tn;
    proj += g * z;
  }
  for (std::size_t j = 0; j < dim; ++j)
    grad_v[j] += (acc[j] - proj * image_vec[j] / vn) / vn;
}

Matrix AdapterState::effective_weight() const {
  Matrix w = w0;
  double s = scale();
  for (std::size_t i = 0; i < w.rows; ++i)
    for (std::size_t j = 0; j < w.cols; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rank(); ++r) acc += b(i, r) * a(r, j);
      w(i, j) += s * acc;
    }
  return w;
}

AdapterState AdapterState::init(Matrix w0, std::size_t rank, double alpha,
                                double init_scale, std::mt19937_64& rng) {
  if (rank == 0) fail("bad_config", "adapter rank must be >= 1");
  AdapterState st;
  st.a = Matrix(rank, w0.cols);
  st.b = Matrix(w0.rows, rank);
  st.w0 = std::move(w0);
  st.alpha = alpha;
  std::uniform_real_distribution<double> u(-init_scale, init_scale);
  for (double& v : st.a.data) v = u(rng);
  return st;
}

std::vector<double> adapter_forward(const AdapterState& state, std::span<const double> x) {
  if (x.size() != state.in_dim())
    fail("dim_mismatch", "adapter input length does not match k");
  // W0 x + (alpha/r) * B (A x)
  std::vector<double> y = matvec(state.w0, x);
  std::vector<double> ax = matvec(state.a, x);
  double s = state.scale();
  for (std::size_t i = 0; i < state.out_dim(); ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < state.rank(); ++r) acc += state.b(i, r) * ax[r];
    y[i] += s * acc;
  }
  return y;
}

void AdapterGrad::add_scaled(const AdapterGrad& other, double factor) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += factor * other.a.data[i];
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] += factor * other.b.data[i];
}

AdapterGrad adapter_grad(const AdapterState& state, std::span<const double> x,
                         std::span<const double> upstream) {
  if (x.size() != state.in_dim() || upstream.size() != state.out_dim())
    fail("dim_mismatch", "adapter grad: inconsistent shapes");
  double s = state.scale();
  AdapterGrad g{Matrix(state.rank(), state.in_dim()), Matrix(state.out_dim(), state.rank())};

  // dA = s * B^T u x^T
  std::vector<double> btu(state.rank(), 0.0);
  for (std::size_t r = 0; r < state.rank(); ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < state.out_dim(); ++i) acc += state.b(i, r) * upstream[i];
    btu[r] = acc;
  }
  for (std::size_t r = 0; r < state.rank(); ++r)
    for (std::size_t j = 0; j < state.in_dim(); ++j) g.a(r, j) = s * btu[r] * x[j];

  // dB = s * u (A x)^T
  std::vector<double> ax = matvec(state.a, x);
  for (std::size_t i = 0; i < state.out_dim(); ++i)
    for (std::size_t r = 0; r < state.rank(); ++r) g.b(i, r) = s * upstream[i] * ax[r];

  return g;
}

}  // namespace hierloss
