#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hierloss/batch.hpp"
#include "hierloss/dataset.hpp"
#include "hierloss/losses.hpp"
#include "hierloss/metrics.hpp"

namespace hierloss {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::string optimizer = "adamw";  // "adamw" | "sgd"
  LossWeights weights;
  bool include_ce = true;  // dropped only by the pure-loss ablation arms
  std::vector<double> epsilon{0.1};  // one value broadcast to all levels, or one per level
  double tau = 0.07;
  TpklMode tpkl_mode = TpklMode::kGlobal;
  std::size_t rank = 16;
  double alpha = 32.0;
  double init_scale = 0.01;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = library default; HIERLOSS_THREADS caps either way
  bool check_grads = false;

  void validate() const;
  std::vector<double> epsilon_for(std::size_t levels) const;
  nlohmann::ordered_json to_json() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double total = 0.0, ce = 0.0, tpkl = 0.0, hisce = 0.0;  // per-sample means
  double val_macro_accuracy = 0.0, val_fpa = 0.0, val_tice = 0.0;
};

struct RunRecord {
  TrainConfig config;
  std::string status = "ok";  // "ok" | "diverged"
  int diverged_epoch = 0;     // set when status == "diverged"
  BatchTerms epoch0;          // per-sample means at init; all terms raw, total weighted
  EvalReport epoch0_eval;
  std::vector<EpochLog> epochs;
  EvalReport final_eval;
  AdapterState adapter;      // final parameters
  double wall_time_sec = 0;  // reported separately, never serialized

  bool ok() const { return status == "ok"; }
  // Deterministic snapshot: identical config + seed gives identical bytes.
  nlohmann::ordered_json to_json() const;
  void write_epochs_csv(const std::string& path) const;
};

RunRecord train(const TrainConfig& config, const DataBundle& data);

struct GridCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  RunRecord record;
};

struct GridResult {
  std::vector<GridCell> cells;
  int best_index = -1;  // -1 when every run failed
  int failed_runs = 0;

  const GridCell& best() const;
  std::string to_csv() const;
};

// One run per (lambda1, lambda2) pair, all sharing the config seed. Best cell
// by validation macro accuracy; ties broken by lower TICE, then lower
// lambda1+lambda2. Failed runs are excluded and counted.
GridResult grid_search(const std::vector<double>& lambda1_values,
                       const std::vector<double>& lambda2_values,
                       const TrainConfig& config, const DataBundle& data);

struct AblationResult {
  // Arms in order: ce, tpkl_only, hisce_only, joint.
  std::vector<std::pair<std::string, RunRecord>> arms;

  const RunRecord& arm(const std::string& name) const;
  std::string to_csv() const;
};

// Four runs sharing seed and split, differing only in active loss terms. The
// tpkl_only arm drops CE entirely unless keep_ce_in_tpkl_arm is set. Config
// lambdas of zero are promoted to 1 so every arm's term actually fires.
AblationResult ablation(const TrainConfig& config, const DataBundle& data,
                        bool keep_ce_in_tpkl_arm = false);

// Adapter persistence (JSON).
nlohmann::ordered_json adapter_to_json(const AdapterState& state);
AdapterState adapter_from_json(const nlohmann::json& j);
void save_adapter(const std::string& path, const AdapterState& state);
AdapterState load_adapter(const std::string& path);

}  // namespace hierloss
