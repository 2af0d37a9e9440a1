#include "hierloss/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "hierloss/error.hpp"
#include "hierloss/optim.hpp"

namespace hierloss {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::ordered_json eval_to_json(const EvalReport& r) { return r.to_json(); }

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.rows * m.cols) fail("bad_format", "matrix data size mismatch");
  m.data = std::move(data);
  return m;
}

// Spot finite-difference check of a few gradient coordinates against the
// batch-summed loss. Used by --check-grads before every update.
void spot_check_gradient(const FeatureDataset& dataset,
                         std::span<const std::size_t> batch, AdapterState& adapter,
                         const ClassEmbeddings& embeddings,
                         const std::vector<SmoothingTable>& tables,
                         const LossConfig& lcfg, const AdapterGrad& analytic,
                         std::mt19937_64& rng, int epoch) {
  auto batch_sum = [&]() {
    double s = 0.0;
    for (std::size_t idx : batch) s += sample_loss(dataset, idx, adapter, embeddings, tables, lcfg);
    return s;
  };
  const double h = 1e-5;
  auto check_coord = [&](Matrix& param, const Matrix& grad_mat, std::size_t flat) {
    double saved = param.data[flat];
    param.data[flat] = saved + h;
    double up = batch_sum();
    param.data[flat] = saved - h;
    double down = batch_sum();
    param.data[flat] = saved;
    double numeric = (up - down) / (2.0 * h);
    double analytic_v = grad_mat.data[flat];
    double rel = std::abs(numeric - analytic_v) /
                 std::max({1.0, std::abs(numeric), std::abs(analytic_v)});
    if (rel > 1e-5)
      fail("grad_check_failed",
           "gradient spot check failed at epoch " + std::to_string(epoch) +
               " (relative error " + fmt17(rel) + ")");
  };
  for (int k = 0; k < 2; ++k) {
    std::uniform_int_distribution<std::size_t> pick_a(0, adapter.a.data.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, adapter.b.data.size() - 1);
    check_coord(adapter.a, analytic.a, pick_a(rng));
    check_coord(adapter.b, analytic.b, pick_b(rng));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail("bad_config", "epochs must be >= 1");
  if (batch_size < 1) fail("bad_config", "batch_size must be >= 1");
  if (!(lr > 0.0)) fail("bad_config", "learning rate must be positive");
  if (weight_decay < 0.0) fail("bad_config", "weight_decay must be nonnegative");
  if (optimizer != "adamw" && optimizer != "sgd")
    fail("bad_config", "optimizer must be 'adamw' or 'sgd'");
  if (!(weights.lambda1 >= 0.0) || !(weights.lambda2 >= 0.0) ||
      !std::isfinite(weights.lambda1) || !std::isfinite(weights.lambda2))
    fail("bad_config", "lambda weights must be finite and nonnegative");
  if (epsilon.empty()) fail("bad_config", "epsilon list is empty");
  for (double e : epsilon)
    if (!(e >= 0.0 && e < 1.0)) fail("bad_epsilon", "epsilon must lie in [0, 1)");
  if (!(tau > 0.0)) fail("bad_config", "tau must be positive");
  if (rank == 0) fail("bad_config", "adapter rank must be >= 1");
  if (!(alpha > 0.0)) fail("bad_config", "alpha must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    fail("bad_config", "val_fraction must lie in [0, 1)");
}

std::vector<double> TrainConfig::epsilon_for(std::size_t levels) const {
  if (epsilon.size() == 1) return std::vector<double>(levels, epsilon[0]);
  if (epsilon.size() != levels)
    fail("bad_config", "epsilon list must have one value or one per level");
  return epsilon;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["train"] = {{"epochs", epochs},
                {"batch_size", batch_size},
                {"lr", lr},
                {"weight_decay", weight_decay},
                {"optimizer", optimizer},
                {"seed", seed},
                {"val_fraction", val_fraction},
                {"threads", threads},
                {"check_grads", check_grads}};
  j["loss"] = {{"lambda1", weights.lambda1},
               {"lambda2", weights.lambda2},
               {"include_ce", include_ce},
               {"epsilon", epsilon},
               {"tau", tau},
               {"tpkl_mode", to_string(tpkl_mode)}};
  j["adapter"] = {{"rank", rank}, {"alpha", alpha}, {"init_scale", init_scale}};
  return j;
}

nlohmann::ordered_json RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config.to_json();
  j["status"] = status;
  if (status == "diverged") j["diverged_epoch"] = diverged_epoch;
  j["epoch0"] = {{"loss_total", epoch0.total},
                 {"loss_ce", epoch0.ce},
                 {"loss_tpkl", epoch0.tpkl},
                 {"loss_hisce", epoch0.hisce},
                 {"eval", eval_to_json(epoch0_eval)}};
  nlohmann::ordered_json epochs_json = nlohmann::ordered_json::array();
  for (const EpochLog& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"loss_total", e.total},
                           {"loss_ce", e.ce},
                           {"loss_tpkl", e.tpkl},
                           {"loss_hisce", e.hisce},
                           {"val_macro_accuracy", e.val_macro_accuracy},
                           {"val_fpa", e.val_fpa},
                           {"val_tice", e.val_tice}});
  }
  j["epochs"] = std::move(epochs_json);
  j["final_eval"] = eval_to_json(final_eval);
  return j;
}

void RunRecord::write_epochs_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("io_error", "cannot write epoch log '" + path + "'");
  out << "epoch,loss_total,loss_ce,loss_tpkl,loss_hisce,"
         "val_macro_accuracy,val_fpa,val_tice\n";
  for (const EpochLog& e : epochs) {
    out << e.epoch << "," << fmt17(e.total) << "," << fmt17(e.ce) << "," << fmt17(e.tpkl)
        << "," << fmt17(e.hisce) << "," << fmt17(e.val_macro_accuracy) << ","
        << fmt17(e.val_fpa) << "," << fmt17(e.val_tice) << "\n";
  }
}

RunRecord train(const TrainConfig& config, const DataBundle& data) {
  config.validate();
  validate_dataset(data.dataset, data.taxonomy);
  validate_embeddings(data.embeddings, data.taxonomy);
  if (data.dataset.dim() != data.embeddings.dim())
    fail("dim_mismatch", "feature dim and embedding dim must match for the identity-base adapter");
  configure_threads(config.threads);

  auto start = std::chrono::steady_clock::now();
  const Taxonomy& tax = data.taxonomy;
  const FeatureDataset& ds = data.dataset;
  std::size_t n = ds.n();
  std::size_t levels = tax.level_count();

  // All randomness flows from the seed in a fixed draw order.
  std::mt19937_64 master(config.seed);
  std::mt19937_64 split_rng(master());
  std::mt19937_64 init_rng(master());
  std::mt19937_64 shuffle_rng(master());
  std::mt19937_64 checker_rng(master());

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), split_rng);
  std::size_t val_n = static_cast<std::size_t>(
      std::lround(config.val_fraction * static_cast<double>(n)));
  if (val_n >= n) val_n = n - 1;
  std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + val_n);
  std::vector<std::size_t> train_idx(perm.begin() + val_n, perm.end());
  // Degenerate split: fall back to evaluating on the training samples.
  std::span<const std::size_t> eval_idx = val_idx.empty()
                                              ? std::span<const std::size_t>(train_idx)
                                              : std::span<const std::size_t>(val_idx);

  std::vector<double> eps = config.epsilon_for(levels);
  std::vector<SmoothingTable> tables;
  for (std::size_t l = 0; l < levels; ++l)
    tables.push_back(build_smoothing_table(tax, l, eps[l]));

  RunRecord rec;
  rec.config = config;
  rec.adapter = AdapterState::init(Matrix::identity(ds.dim()), config.rank, config.alpha,
                                   config.init_scale, init_rng);

  LossConfig lcfg{config.weights, config.include_ce, config.tau, config.tpkl_mode};

  // Epoch 0: raw values of every term at the initial parameters, plus the
  // held-out evaluation, so runs with different active terms stay comparable.
  {
    LossConfig all_terms{{1.0, 1.0}, true, config.tau, config.tpkl_mode};
    BatchResult full = batch_loss_grad(ds, train_idx, rec.adapter, data.embeddings,
                                       tables, all_terms);
    double inv = 1.0 / static_cast<double>(full.count);
    rec.epoch0.ce = full.sums.ce * inv;
    rec.epoch0.tpkl = full.sums.tpkl * inv;
    rec.epoch0.hisce = full.sums.hisce * inv;
    rec.epoch0.total = (config.include_ce ? rec.epoch0.ce : 0.0) +
                       config.weights.lambda1 * rec.epoch0.tpkl +
                       config.weights.lambda2 * rec.epoch0.hisce;
    rec.epoch0_eval = evaluate(predict(ds, eval_idx, rec.adapter, data.embeddings), tax);
  }

  Optimizer opt = Optimizer::make(config.optimizer, config.lr, config.weight_decay,
                                  rec.adapter);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
    BatchTerms epoch_sums;
    std::size_t epoch_count = 0;
    bool diverged = false;

    for (std::size_t off = 0; off < train_idx.size(); off += config.batch_size) {
      std::size_t len = std::min<std::size_t>(config.batch_size, train_idx.size() - off);
      std::span<const std::size_t> batch(train_idx.data() + off, len);
      BatchResult res =
          batch_loss_grad(ds, batch, rec.adapter, data.embeddings, tables, lcfg);
      if (!std::isfinite(res.sums.total)) {
        rec.status = "diverged";
        rec.diverged_epoch = epoch;
        diverged = true;
        break;
      }
      if (config.check_grads)
        spot_check_gradient(ds, batch, rec.adapter, data.embeddings, tables, lcfg,
                            res.grad, checker_rng, epoch);
      opt.step(rec.adapter, res.grad, 1.0 / static_cast<double>(res.count));
      epoch_sums.total += res.sums.total;
      epoch_sums.ce += res.sums.ce;
      epoch_sums.tpkl += res.sums.tpkl;
      epoch_sums.hisce += res.sums.hisce;
      epoch_count += res.count;
    }
    if (diverged) break;

    EpochLog log;
    log.epoch = epoch;
    double inv = 1.0 / static_cast<double>(epoch_count);
    log.total = epoch_sums.total * inv;
    log.ce = epoch_sums.ce * inv;
    log.tpkl = epoch_sums.tpkl * inv;
    log.hisce = epoch_sums.hisce * inv;
    EvalReport ev = evaluate(predict(ds, eval_idx, rec.adapter, data.embeddings), tax);
    log.val_macro_accuracy = ev.macro_accuracy;
    log.val_fpa = ev.fpa;
    log.val_tice = ev.tice;
    rec.epochs.push_back(log);
  }

  rec.final_eval = evaluate(predict(ds, eval_idx, rec.adapter, data.embeddings), tax);
  rec.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

const GridCell& GridResult::best() const {
  if (best_index < 0) fail("no_successful_runs", "every grid cell failed");
  return cells[best_index];
}

std::string GridResult::to_csv() const {
  std::string out = "lambda1,lambda2,status,macro_accuracy,fpa,tice,wap\n";
  for (const GridCell& c : cells) {
    const EvalReport& e = c.record.final_eval;
    out += fmt17(c.lambda1);
    out += ",";
    out += fmt17(c.lambda2);
    out += "," + c.record.status + "," + fmt17(e.macro_accuracy) + "," + fmt17(e.fpa) +
           "," + fmt17(e.tice) + "," + fmt17(e.wap) + "\n";
  }
  return out;
}

GridResult grid_search(const std::vector<double>& lambda1_values,
                       const std::vector<double>& lambda2_values,
                       const TrainConfig& config, const DataBundle& data) {
  if (lambda1_values.empty() || lambda2_values.empty())
    fail("bad_config", "lambda grids must be nonempty");
  GridResult result;
  for (double l1 : lambda1_values) {
    for (double l2 : lambda2_values) {
      TrainConfig cell_cfg = config;
      cell_cfg.weights = {l1, l2};
      GridCell cell;
      cell.lambda1 = l1;
      cell.lambda2 = l2;
      cell.record = train(cell_cfg, data);
      if (!cell.record.ok()) ++result.failed_runs;
      result.cells.push_back(std::move(cell));
    }
  }
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const GridCell& c = result.cells[i];
    if (!c.record.ok()) continue;
    if (result.best_index < 0) {
      result.best_index = static_cast<int>(i);
      continue;
    }
    const GridCell& b = result.cells[result.best_index];
    const EvalReport& ce = c.record.final_eval;
    const EvalReport& be = b.record.final_eval;
    bool better = false;
    if (ce.macro_accuracy > be.macro_accuracy)
      better = true;
    else if (ce.macro_accuracy == be.macro_accuracy) {
      if (ce.tice < be.tice)
        better = true;
      else if (ce.tice == be.tice &&
               c.lambda1 + c.lambda2 < b.lambda1 + b.lambda2)
        better = true;
    }
    if (better) result.best_index = static_cast<int>(i);
  }
  return result;
}

const RunRecord& AblationResult::arm(const std::string& name) const {
  for (const auto& [arm_name, record] : arms)
    if (arm_name == name) return record;
  fail("bad_config", "unknown ablation arm '" + name + "'");
}

std::string AblationResult::to_csv() const {
  std::string out = "arm,status,macro_accuracy,fpa,tice,wap\n";
  for (const auto& [name, record] : arms) {
    const EvalReport& e = record.final_eval;
    out += name + "," + record.status + "," + fmt17(e.macro_accuracy) + "," +
           fmt17(e.fpa) + "," + fmt17(e.tice) + "," + fmt17(e.wap) + "\n";
  }
  return out;
}

AblationResult ablation(const TrainConfig& config, const DataBundle& data,
                        bool keep_ce_in_tpkl_arm) {
  double l1 = config.weights.lambda1 != 0.0 ? config.weights.lambda1 : 1.0;
  double l2 = config.weights.lambda2 != 0.0 ? config.weights.lambda2 : 1.0;

  auto arm_config = [&](bool ce, double lambda1, double lambda2) {
    TrainConfig c = config;
    c.include_ce = ce;
    c.weights = {lambda1, lambda2};
    return c;
  };

  AblationResult result;
  result.arms.emplace_back("ce", train(arm_config(true, 0.0, 0.0), data));
  result.arms.emplace_back("tpkl_only",
                           train(arm_config(keep_ce_in_tpkl_arm, l1, 0.0), data));
  result.arms.emplace_back("hisce_only", train(arm_config(false, 0.0, l2), data));
  result.arms.emplace_back("joint", train(arm_config(true, l1, l2), data));
  return result;
}

nlohmann::ordered_json adapter_to_json(const AdapterState& state) {
  nlohmann::ordered_json j;
  j["alpha"] = state.alpha;
  j["rank"] = state.rank();
  j["w0"] = matrix_to_json(state.w0);
  j["a"] = matrix_to_json(state.a);
  j["b"] = matrix_to_json(state.b);
  return j;
}

AdapterState adapter_from_json(const nlohmann::json& j) {
  AdapterState st;
  st.alpha = j.at("alpha").get<double>();
  st.w0 = matrix_from_json(j.at("w0"));
  st.a = matrix_from_json(j.at("a"));
  st.b = matrix_from_json(j.at("b"));
  if (st.a.rows != j.at("rank").get<std::size_t>() || st.b.cols != st.a.rows ||
      st.w0.rows != st.b.rows || st.w0.cols != st.a.cols)
    fail("bad_format", "adapter file has inconsistent shapes");
  return st;
}

void save_adapter(const std::string& path, const AdapterState& state) {
  std::ofstream out(path);
  if (!out) fail("io_error", "cannot write adapter file '" + path + "'");
  out << adapter_to_json(state).dump(2) << "\n";
}

AdapterState load_adapter(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("missing_file", "cannot open adapter file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("bad_format", "adapter file '" + path + "' is not valid JSON: " + e.what());
  }
  return adapter_from_json(j);
}

}  // namespace hierloss
