#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <vector>

#include <CLI11.hpp>

#include "hierloss/batch.hpp"
#include "hierloss/synth.hpp"

using namespace hierloss;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warmup
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

double max_rel_diff(const BatchResult& a, const BatchResult& b) {
  auto rel = [](double x, double y) {
    return std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)});
  };
  double m = rel(a.sums.total, b.sums.total);
  for (std::size_t i = 0; i < a.grad.a.data.size(); ++i)
    m = std::max(m, rel(a.grad.a.data[i], b.grad.a.data[i]));
  for (std::size_t i = 0; i < a.grad.b.data.size(); ++i)
    m = std::max(m, rel(a.grad.b.data[i], b.grad.b.data[i]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel benchmark"};
  int reps = 5;
  int per_leaf = 20;
  int threads = 0;
  app.add_option("--reps", reps, "timing repetitions (best-of)");
  app.add_option("--per-leaf", per_leaf, "samples per leaf class");
  app.add_option("--threads", threads, "worker cap (0 = library default)");
  CLI11_PARSE(app, argc, argv);

  SynthSpec spec;
  spec.branching = {4, 4, 4};
  spec.feature_dim = 32;
  spec.samples_per_leaf = per_leaf;
  spec.spread = 0.6;
  spec.signal = 0.5;
  spec.seed = 11;
  DataBundle data = generate_synthetic(spec);

  std::mt19937_64 rng(5);
  AdapterState adapter =
      AdapterState::init(Matrix::identity(data.dataset.dim()), 8, 16.0, 0.1, rng);
  std::uniform_real_distribution<double> weight(-0.2, 0.2);
  for (double& v : adapter.b.data) v = weight(rng);

  std::vector<SmoothingTable> tables;
  for (std::size_t l = 0; l < data.taxonomy.level_count(); ++l)
    tables.push_back(build_smoothing_table(data.taxonomy, l, 0.1));
  LossConfig cfg{{1.0, 1.0}, true, 0.07, TpklMode::kPerLevel};

  std::vector<std::size_t> indices(data.dataset.n());
  std::iota(indices.begin(), indices.end(), 0);

  int effective = configure_threads(threads);
  std::printf("samples: %zu   dim: %zu   threads: %d\n", data.dataset.n(),
              data.dataset.dim(), effective);

  BatchResult serial_res = batch_loss_grad_serial(data.dataset, indices, adapter,
                                                  data.embeddings, tables, cfg);
  BatchResult parallel_res =
      batch_loss_grad(data.dataset, indices, adapter, data.embeddings, tables, cfg);
  double grad_diff = max_rel_diff(serial_res, parallel_res);

  PredictionSet serial_pred =
      predict_serial(data.dataset, indices, adapter, data.embeddings);
  PredictionSet parallel_pred = predict(data.dataset, indices, adapter, data.embeddings);
  bool preds_equal =
      serial_pred.pred == parallel_pred.pred && serial_pred.truth == parallel_pred.truth;

  double grad_serial_ms = time_ms(reps, [&] {
    batch_loss_grad_serial(data.dataset, indices, adapter, data.embeddings, tables, cfg);
  });
  double grad_parallel_ms = time_ms(reps, [&] {
    batch_loss_grad(data.dataset, indices, adapter, data.embeddings, tables, cfg);
  });
  double pred_serial_ms = time_ms(
      reps, [&] { predict_serial(data.dataset, indices, adapter, data.embeddings); });
  double pred_parallel_ms =
      time_ms(reps, [&] { predict(data.dataset, indices, adapter, data.embeddings); });

  std::printf("batch gradient   serial %8.2f ms   parallel %8.2f ms   speedup %.2fx\n",
              grad_serial_ms, grad_parallel_ms, grad_serial_ms / grad_parallel_ms);
  std::printf("predict          serial %8.2f ms   parallel %8.2f ms   speedup %.2fx\n",
              pred_serial_ms, pred_parallel_ms, pred_serial_ms / pred_parallel_ms);
  std::printf("kernel equivalence: %s (max relative difference %.3g)\n",
              grad_diff < 1e-9 && preds_equal ? "OK" : "MISMATCH", grad_diff);
  return (grad_diff < 1e-9 && preds_equal) ? 0 : 1;
}
