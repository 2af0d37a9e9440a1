#include "hierloss/batch.hpp"

#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hierloss/error.hpp"

namespace hierloss {

namespace {

constexpr std::size_t kBlock = 32;

// False when the adapter output is unusable (nonfinite after a blow-up, or
// exactly zero so cosine is undefined). Divergence is reported as NaN sums by
// the callers rather than an exception: worker loops run inside OpenMP
// regions, which exceptions must never escape.
bool forward_logits(const FeatureDataset& dataset, std::size_t sample,
                    const AdapterState& adapter, const ClassEmbeddings& embeddings,
                    double tau, HierLogits& hl, std::vector<double>* v_out) {
  std::vector<double> v = adapter_forward(adapter, dataset.features.row(sample));
  double norm = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return false;
    norm += x * x;
  }
  if (norm == 0.0) return false;
  hl.tau = tau;
  hl.z.clear();
  hl.z.reserve(embeddings.levels());
  for (std::size_t l = 0; l < embeddings.levels(); ++l)
    hl.z.push_back(cosine_logits(v, embeddings.per_level[l]));
  if (v_out) *v_out = std::move(v);
  return true;
}

BatchResult diverged_sample(const AdapterState& adapter) {
  double nan = std::numeric_limits<double>::quiet_NaN();
  BatchResult res;
  res.sums = {nan, nan, nan, nan};
  res.grad = AdapterGrad{Matrix(adapter.rank(), adapter.in_dim()),
                         Matrix(adapter.out_dim(), adapter.rank())};
  res.count = 1;
  return res;
}

void check_shapes(const FeatureDataset& dataset, const AdapterState& adapter,
                  const ClassEmbeddings& embeddings) {
  if (adapter.in_dim() != dataset.dim())
    fail("dim_mismatch", "adapter input dim does not match feature dim");
  if (adapter.out_dim() != embeddings.dim())
    fail("dim_mismatch", "adapter output dim does not match embedding dim");
  if (dataset.levels() != embeddings.levels())
    fail("shape_mismatch", "dataset and embeddings disagree on level count");
}

}  // namespace

BatchResult sample_loss_grad(const FeatureDataset& dataset, std::size_t sample,
                             const AdapterState& adapter, const ClassEmbeddings& embeddings,
                             const std::vector<SmoothingTable>& tables,
                             const LossConfig& config) {
  std::vector<double> v;
  HierLogits hl;
  if (!forward_logits(dataset, sample, adapter, embeddings, config.tau, hl, &v))
    return diverged_sample(adapter);
  LabelPath path = dataset.label_path(sample);
  TotalLossResult loss =
      combined_loss(hl, path, tables, config.weights, config.include_ce, config.mode);

  std::vector<double> grad_v(v.size(), 0.0);
  for (std::size_t l = 0; l < embeddings.levels(); ++l)
    cosine_logits_backward(v, embeddings.per_level[l], loss.grad[l], grad_v);

  BatchResult res;
  res.sums = {loss.total, loss.ce, loss.tpkl, loss.hisce};
  res.grad = adapter_grad(adapter, dataset.features.row(sample), grad_v);
  res.count = 1;
  return res;
}

double sample_loss(const FeatureDataset& dataset, std::size_t sample,
                   const AdapterState& adapter, const ClassEmbeddings& embeddings,
                   const std::vector<SmoothingTable>& tables, const LossConfig& config) {
  HierLogits hl;
  if (!forward_logits(dataset, sample, adapter, embeddings, config.tau, hl, nullptr))
    return std::numeric_limits<double>::quiet_NaN();
  return combined_loss(hl, dataset.label_path(sample), tables, config.weights,
                       config.include_ce, config.mode)
      .total;
}

BatchResult batch_loss_grad_serial(const FeatureDataset& dataset,
                                   std::span<const std::size_t> indices,
                                   const AdapterState& adapter,
                                   const ClassEmbeddings& embeddings,
                                   const std::vector<SmoothingTable>& tables,
                                   const LossConfig& config) {
  check_shapes(dataset, adapter, embeddings);
  BatchResult acc;
  acc.grad = AdapterGrad{Matrix(adapter.rank(), adapter.in_dim()),
                         Matrix(adapter.out_dim(), adapter.rank())};
  for (std::size_t idx : indices) {
    BatchResult one = sample_loss_grad(dataset, idx, adapter, embeddings, tables, config);
    acc.sums.total += one.sums.total;
    acc.sums.ce += one.sums.ce;
    acc.sums.tpkl += one.sums.tpkl;
    acc.sums.hisce += one.sums.hisce;
    acc.grad.add_scaled(one.grad, 1.0);
    ++acc.count;
  }
  return acc;
}

BatchResult batch_loss_grad(const FeatureDataset& dataset,
                            std::span<const std::size_t> indices,
                            const AdapterState& adapter, const ClassEmbeddings& embeddings,
                            const std::vector<SmoothingTable>& tables,
                            const LossConfig& config) {
  check_shapes(dataset, adapter, embeddings);
  std::size_t n = indices.size();
  std::size_t n_blocks = (n + kBlock - 1) / kBlock;
  std::vector<BatchResult> blocks(n_blocks);
  std::exception_ptr first_error = nullptr;

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t b = 0; b < n_blocks; ++b) {
    try {
      BatchResult acc;
      acc.grad = AdapterGrad{Matrix(adapter.rank(), adapter.in_dim()),
                             Matrix(adapter.out_dim(), adapter.rank())};
      std::size_t hi = std::min(n, (b + 1) * kBlock);
      for (std::size_t i = b * kBlock; i < hi; ++i) {
        BatchResult one =
            sample_loss_grad(dataset, indices[i], adapter, embeddings, tables, config);
        acc.sums.total += one.sums.total;
        acc.sums.ce += one.sums.ce;
        acc.sums.tpkl += one.sums.tpkl;
        acc.sums.hisce += one.sums.hisce;
        acc.grad.add_scaled(one.grad, 1.0);
        ++acc.count;
      }
      blocks[b] = std::move(acc);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  BatchResult total;
  total.grad = AdapterGrad{Matrix(adapter.rank(), adapter.in_dim()),
                           Matrix(adapter.out_dim(), adapter.rank())};
  for (BatchResult& b : blocks) {
    total.sums.total += b.sums.total;
    total.sums.ce += b.sums.ce;
    total.sums.tpkl += b.sums.tpkl;
    total.sums.hisce += b.sums.hisce;
    total.grad.add_scaled(b.grad, 1.0);
    total.count += b.count;
  }
  return total;
}

PredictionSet predict_serial(const FeatureDataset& dataset,
                             std::span<const std::size_t> indices,
                             const AdapterState& adapter, const ClassEmbeddings& embeddings) {
  check_shapes(dataset, adapter, embeddings);
  PredictionSet preds;
  preds.n = indices.size();
  preds.levels = dataset.levels();
  preds.pred.assign(preds.n * preds.levels, 0);
  preds.truth.assign(preds.n * preds.levels, 0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    HierLogits hl;
    bool usable = forward_logits(dataset, indices[i], adapter, embeddings, 1.0, hl, nullptr);
    for (std::size_t l = 0; l < preds.levels; ++l) {
      int best = 0;
      if (usable)
        for (std::size_t c = 1; c < hl.z[l].size(); ++c)
          if (hl.z[l][c] > hl.z[l][best]) best = static_cast<int>(c);
      preds.pred[i * preds.levels + l] = best;
      preds.truth[i * preds.levels + l] = dataset.label_at(indices[i], l);
    }
  }
  return preds;
}

PredictionSet predict(const FeatureDataset& dataset, std::span<const std::size_t> indices,
                      const AdapterState& adapter, const ClassEmbeddings& embeddings) {
  check_shapes(dataset, adapter, embeddings);
  PredictionSet preds;
  preds.n = indices.size();
  preds.levels = dataset.levels();
  preds.pred.assign(preds.n * preds.levels, 0);
  preds.truth.assign(preds.n * preds.levels, 0);
  std::exception_ptr first_error = nullptr;

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < indices.size(); ++i) {
    try {
      HierLogits hl;
      bool usable =
          forward_logits(dataset, indices[i], adapter, embeddings, 1.0, hl, nullptr);
      for (std::size_t l = 0; l < preds.levels; ++l) {
        int best = 0;
        if (usable)
          for (std::size_t c = 1; c < hl.z[l].size(); ++c)
            if (hl.z[l][c] > hl.z[l][best]) best = static_cast<int>(c);
        preds.pred[i * preds.levels + l] = best;
        preds.truth[i * preds.levels + l] = dataset.label_at(indices[i], l);
      }
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return preds;
}

int configure_threads(int requested) {
  int cap = 0;
  if (const char* env = std::getenv("HIERLOSS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) cap = static_cast<int>(v);
  }
  int effective = requested;
  if (cap > 0) effective = effective > 0 ? std::min(effective, cap) : cap;
#ifdef _OPENMP
  if (effective > 0) omp_set_num_threads(effective);
  return effective > 0 ? effective : omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace hierloss
