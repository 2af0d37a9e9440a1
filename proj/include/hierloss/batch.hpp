#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hierloss/dataset.hpp"
#include "hierloss/embedspace.hpp"
#include "hierloss/losses.hpp"
#include "hierloss/metrics.hpp"

namespace hierloss {

// Resolved loss configuration shared by a whole run.
struct LossConfig {
  LossWeights weights;
  bool include_ce = true;
  double tau = 0.07;
  TpklMode mode = TpklMode::kGlobal;
};

// Loss-term sums over a set of samples.
struct BatchTerms {
  double total = 0.0;
  double ce = 0.0;
  double tpkl = 0.0;
  double hisce = 0.0;
};

struct BatchResult {
  BatchTerms sums;
  AdapterGrad grad;  // summed over samples; caller scales by 1/batch
  std::size_t count = 0;
};

// Loss and adapter gradient for a single sample: adapter forward, per-level
// cosine scores, combined loss, then the chain back onto A and B.
BatchResult sample_loss_grad(const FeatureDataset& dataset, std::size_t sample,
                             const AdapterState& adapter, const ClassEmbeddings& embeddings,
                             const std::vector<SmoothingTable>& tables,
                             const LossConfig& config);

// Loss value only (no gradient); used by finite-difference checks.
double sample_loss(const FeatureDataset& dataset, std::size_t sample,
                   const AdapterState& adapter, const ClassEmbeddings& embeddings,
                   const std::vector<SmoothingTable>& tables, const LossConfig& config);

// Serial reference: plain in-order loop over `indices`. Kept as the test
// baseline for the parallel kernel.
BatchResult batch_loss_grad_serial(const FeatureDataset& dataset,
                                   std::span<const std::size_t> indices,
                                   const AdapterState& adapter,
                                   const ClassEmbeddings& embeddings,
                                   const std::vector<SmoothingTable>& tables,
                                   const LossConfig& config);

// OpenMP kernel. Samples are grouped into fixed-size blocks; each block is
// accumulated in sample order and blocks are merged in block order, so the
// result does not depend on the number of threads.
BatchResult batch_loss_grad(const FeatureDataset& dataset,
                            std::span<const std::size_t> indices,
                            const AdapterState& adapter, const ClassEmbeddings& embeddings,
                            const std::vector<SmoothingTable>& tables,
                            const LossConfig& config);

// Argmax predictions (ties -> lowest class id) for the given samples, paired
// with their ground-truth rows. Serial reference plus OpenMP kernel.
PredictionSet predict_serial(const FeatureDataset& dataset,
                             std::span<const std::size_t> indices,
                             const AdapterState& adapter, const ClassEmbeddings& embeddings);
PredictionSet predict(const FeatureDataset& dataset, std::span<const std::size_t> indices,
                      const AdapterState& adapter, const ClassEmbeddings& embeddings);

// Worker cap: the smaller of the HIERLOSS_THREADS environment variable and
// `requested` (0 means no preference). Applies the cap to OpenMP and returns
// the effective thread count.
int configure_threads(int requested);

}  // namespace hierloss
