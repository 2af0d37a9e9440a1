#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hierloss/config.hpp"
#include "hierloss/dataset.hpp"
#include "hierloss/error.hpp"
#include "hierloss/gradcheck.hpp"
#include "hierloss/metrics.hpp"
#include "hierloss/synth.hpp"
#include "hierloss/taxonomy.hpp"
#include "hierloss/trainer.hpp"

namespace fs = std::filesystem;
using namespace hierloss;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string error_json(const std::string& code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail("io_error", "cannot write '" + path.string() + "'");
  out << text;
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string timestamp_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail("bad_usage", flag + ": '" + item + "' is not a number");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return values;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> values;
  for (double v : parse_double_list(text, flag)) {
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) fail("bad_usage", flag + ": expected integers");
    values.push_back(i);
  }
  return values;
}

// Options shared by the training-style commands. Direct flags are funneled
// through the same section.key=value path as --set, so precedence is simply
// config file < --set < flags, all validated against one schema.
struct TrainCli {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> flag_sets;
  std::string taxonomy, features, embeddings;
  std::string out_dir;

  // `sweep` owns --lambda1/--lambda2 itself (they are comma lists there).
  void add_common(CLI::App* cmd, bool skip_lambdas = false) {
    cmd->add_option("--config", config_path, "run config JSON file");
    cmd->add_option("--set", sets, "override, e.g. --set train.lr=0.01")
        ->take_all();
    cmd->add_option("--taxonomy", taxonomy, "taxonomy JSON file");
    cmd->add_option("--features", features, "feature CSV file");
    cmd->add_option("--embeddings", embeddings, "class-embedding CSV file");
    cmd->add_option("--out", out_dir, "run directory (default runs/<timestamp>-seed<N>)");

    auto num = [this](const std::string& key) {
      return [this, key](const double& v) { flag_sets.push_back(key + "=" + fmt17(v)); };
    };
    auto integer = [this](const std::string& key) {
      return [this, key](const std::int64_t& v) {
        flag_sets.push_back(key + "=" + std::to_string(v));
      };
    };
    cmd->add_option_function<std::int64_t>("--epochs", integer("train.epochs"));
    cmd->add_option_function<std::int64_t>("--batch-size", integer("train.batch_size"));
    cmd->add_option_function<double>("--lr", num("train.lr"));
    cmd->add_option_function<double>("--weight-decay", num("train.weight_decay"));
    cmd->add_option_function<std::string>(
        "--optimizer",
        [this](const std::string& v) { flag_sets.push_back("train.optimizer=" + v); },
        "adamw or sgd");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [this](const std::uint64_t& v) {
          flag_sets.push_back("train.seed=" + std::to_string(v));
        });
    cmd->add_option_function<double>("--val-fraction", num("train.val_fraction"));
    cmd->add_option_function<std::int64_t>("--threads", integer("train.threads"));
    cmd->add_flag_function("--check-grads", [this](std::int64_t) {
      flag_sets.push_back("train.check_grads=true");
    });
    if (!skip_lambdas) {
      cmd->add_option_function<double>("--lambda1", num("loss.lambda1"));
      cmd->add_option_function<double>("--lambda2", num("loss.lambda2"));
    }
    cmd->add_flag_function("--no-ce", [this](std::int64_t) {
      flag_sets.push_back("loss.include_ce=false");
    });
    cmd->add_option_function<std::string>(
        "--epsilon",
        [this](const std::string& v) {
          std::string list = "[";
          for (double e : parse_double_list(v, "--epsilon")) {
            if (list.size() > 1) list += ",";
            list += fmt17(e);
          }
          flag_sets.push_back("loss.epsilon=" + list + "]");
        },
        "sibling-smoothing strength, global or one value per level");
    cmd->add_option_function<double>("--tau", num("loss.tau"));
    cmd->add_option_function<std::string>(
        "--tpkl-mode",
        [this](const std::string& v) { flag_sets.push_back("loss.tpkl_mode=" + v); },
        "per-level or global");
    cmd->add_option_function<std::int64_t>("--rank", integer("adapter.rank"));
    cmd->add_option_function<double>("--alpha", num("adapter.alpha"));
    cmd->add_option_function<double>("--init-scale", num("adapter.init_scale"));
  }

  RunConfig resolve() const {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) fail("missing_file", "cannot open config file '" + config_path + "'");
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        fail("bad_format", "config file '" + config_path + "' is not valid JSON: " + e.what());
      }
    }
    for (const std::string& s : sets) apply_override(doc, s);
    for (const std::string& s : flag_sets) apply_override(doc, s);
    RunConfig cfg = RunConfig::from_json(doc);
    if (!taxonomy.empty()) cfg.taxonomy_path = taxonomy;
    if (!features.empty()) cfg.features_path = features;
    if (!embeddings.empty()) cfg.embeddings_path = embeddings;
    return cfg;
  }

  DataBundle load_data(const RunConfig& cfg) const {
    if (cfg.taxonomy_path.empty() || cfg.features_path.empty() ||
        cfg.embeddings_path.empty())
      fail("bad_config",
           "taxonomy, features and embeddings paths are required "
           "(config data section or --taxonomy/--features/--embeddings)");
    return load_bundle(cfg.taxonomy_path, cfg.features_path, cfg.embeddings_path);
  }

  fs::path run_dir(std::uint64_t seed) const {
    fs::path dir = out_dir.empty()
                       ? fs::path("runs") / (timestamp_utc() + "-seed" + std::to_string(seed))
                       : fs::path(out_dir);
    fs::create_directories(dir);
    return dir;
  }
};

void write_run_artifacts(const fs::path& dir, const RunRecord& rec) {
  write_json_file(dir / "run_record.json", rec.to_json());
  rec.write_epochs_csv((dir / "epochs.csv").string());
  save_adapter((dir / "adapter.json").string(), rec.adapter);
}

void cmd_gen_synth(const SynthSpec& spec, const std::string& out_dir) {
  DataBundle data = generate_synthetic(spec);
  fs::path dir(out_dir);
  fs::create_directories(dir);
  write_json_file(dir / "taxonomy.json", data.taxonomy.to_json());
  save_features_csv((dir / "features.csv").string(), data.dataset);
  save_embeddings_csv((dir / "embeddings.csv").string(), data.embeddings);
  std::cout << "levels:";
  for (std::size_t l = 0; l < data.taxonomy.level_count(); ++l)
    std::cout << " " << data.taxonomy.class_count(l);
  std::cout << "\nsamples: " << data.dataset.n() << "  dim: " << data.dataset.dim()
            << "\nwrote " << (dir / "taxonomy.json").string() << ", "
            << (dir / "features.csv").string() << ", "
            << (dir / "embeddings.csv").string() << "\n";
}

void cmd_train(const TrainCli& t) {
  RunConfig cfg = t.resolve();
  DataBundle data = t.load_data(cfg);
  fs::path dir = t.run_dir(cfg.train.seed);
  write_json_file(dir / "resolved_config.json", cfg.to_json());
  RunRecord rec = train(cfg.train, data);
  write_run_artifacts(dir, rec);
  write_json_file(dir / "run_meta.json",
                  nlohmann::ordered_json{{"wall_time_sec", rec.wall_time_sec}});
  std::cout << "status: " << rec.status;
  if (!rec.ok()) std::cout << " (epoch " << rec.diverged_epoch << ")";
  std::cout << "\n" << rec.final_eval.table(data.taxonomy);
  std::cout << "run directory: " << dir.string() << "\n";
}

void cmd_eval(const std::string& preds_path, const std::string& taxonomy_path,
              const std::string& out_dir) {
  Taxonomy tax = Taxonomy::load_file(taxonomy_path);
  PredictionSet preds = load_predictions_csv(preds_path);
  EvalReport report = evaluate(preds, tax);
  std::cout << report.table(tax);
  if (!out_dir.empty()) {
    fs::path dir(out_dir);
    fs::create_directories(dir);
    write_json_file(dir / "report.json", report.to_json());
    std::cout << "wrote " << (dir / "report.json").string() << "\n";
  }
}

void cmd_sweep(const TrainCli& t, const std::string& l1_text, const std::string& l2_text) {
  RunConfig cfg = t.resolve();
  DataBundle data = t.load_data(cfg);
  std::vector<double> l1 = parse_double_list(l1_text, "--lambda1");
  std::vector<double> l2 = l2_text.empty()
                               ? std::vector<double>{cfg.train.weights.lambda2}
                               : parse_double_list(l2_text, "--lambda2");
  fs::path dir = t.run_dir(cfg.train.seed);
  write_json_file(dir / "resolved_config.json", cfg.to_json());
  GridResult grid = grid_search(l1, l2, cfg.train, data);
  write_text(dir / "sweep.csv", grid.to_csv());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    fs::path cell_dir = dir / "cells" / ("cell_" + std::to_string(i));
    fs::create_directories(cell_dir);
    write_run_artifacts(cell_dir, grid.cells[i].record);
  }
  nlohmann::ordered_json best;
  best["failed_runs"] = grid.failed_runs;
  if (grid.best_index >= 0) {
    best["index"] = grid.best_index;
    best["lambda1"] = grid.best().lambda1;
    best["lambda2"] = grid.best().lambda2;
    best["macro_accuracy"] = grid.best().record.final_eval.macro_accuracy;
  }
  write_json_file(dir / "best.json", best);
  std::cout << grid.to_csv();
  if (grid.failed_runs > 0)
    std::cout << "warning: " << grid.failed_runs << " run(s) failed and were excluded\n";
  if (grid.best_index >= 0)
    std::cout << "best: lambda1=" << fmt17(grid.best().lambda1)
              << " lambda2=" << fmt17(grid.best().lambda2) << "\n";
  std::cout << "run directory: " << dir.string() << "\n";
}

void cmd_ablate(const TrainCli& t, bool keep_ce) {
  RunConfig cfg = t.resolve();
  DataBundle data = t.load_data(cfg);
  fs::path dir = t.run_dir(cfg.train.seed);
  write_json_file(dir / "resolved_config.json", cfg.to_json());
  AblationResult result = ablation(cfg.train, data, keep_ce);
  write_text(dir / "ablation.csv", result.to_csv());
  for (const auto& [name, record] : result.arms) {
    fs::path arm_dir = dir / "arms" / name;
    fs::create_directories(arm_dir);
    write_run_artifacts(arm_dir, record);
  }
  std::cout << result.to_csv();
  std::cout << "run directory: " << dir.string() << "\n";
}

void cmd_check_grads(std::uint64_t seed, int instances) {
  GradAuditResult audit = run_gradient_audit(seed, instances);
  std::printf("loss configurations:    %4d   max relative error %.3g\n",
              audit.loss_checks, audit.max_rel_loss);
  std::printf("adapter configurations: %4d   max relative error %.3g\n",
              audit.adapter_checks, audit.max_rel_adapter);
  if (!audit.ok())
    fail("grad_check_failed", "finite-difference audit exceeded tolerance");
  std::cout << "gradient audit: PASS\n";
}

void cmd_dump_embeddings(const TrainCli& t, const std::string& adapter_path) {
  RunConfig cfg = t.resolve();
  DataBundle data = t.load_data(cfg);
  AdapterState adapter =
      adapter_path.empty()
          ? AdapterState{Matrix::identity(data.dataset.dim()),
                         Matrix(1, data.dataset.dim()), Matrix(data.dataset.dim(), 1), 1.0}
          : load_adapter(adapter_path);
  Matrix transformed(data.dataset.n(), adapter.out_dim());
  for (std::size_t i = 0; i < data.dataset.n(); ++i) {
    std::vector<double> y = adapter_forward(adapter, data.dataset.features.row(i));
    for (std::size_t j = 0; j < y.size(); ++j) transformed(i, j) = y[j];
  }
  FeatureDataset out_ds{std::move(transformed), data.dataset.labels,
                        data.dataset.level_sizes};
  fs::path dir = t.run_dir(cfg.train.seed);
  save_features_csv((dir / "features_transformed.csv").string(), out_ds);
  save_embeddings_csv((dir / "class_embeddings.csv").string(), data.embeddings);
  std::cout << "wrote " << (dir / "features_transformed.csv").string() << " and "
            << (dir / "class_embeddings.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchy-aware classification toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic hierarchical dataset");
  SynthSpec spec;
  std::string branching_text, gen_out = "data";
  gen->add_option("--branching", branching_text, "per-level branching, e.g. 3,3,3")
      ->required();
  gen->add_option("--dim", spec.feature_dim, "feature dimension");
  gen->add_option("--per-leaf", spec.samples_per_leaf, "samples per leaf class");
  gen->add_option("--spread", spec.spread, "intra-leaf noise scale");
  gen->add_option("--signal", spec.signal, "per-level hierarchy signal strength");
  gen->add_option("--seed", spec.seed, "random seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->callback([&] {
    spec.branching = parse_int_list(branching_text, "--branching");
    cmd_gen_synth(spec, gen_out);
  });

  auto* tr = app.add_subcommand("train", "train the adapter on a feature dataset");
  TrainCli train_cli;
  train_cli.add_common(tr);
  tr->callback([&] { cmd_train(train_cli); });

  auto* ev = app.add_subcommand("eval", "score a prediction file against a taxonomy");
  std::string preds_path, eval_taxonomy, eval_out;
  ev->add_option("--preds", preds_path, "prediction CSV")->required();
  ev->add_option("--taxonomy", eval_taxonomy, "taxonomy JSON")->required();
  ev->add_option("--out", eval_out, "directory for report.json");
  ev->callback([&] { cmd_eval(preds_path, eval_taxonomy, eval_out); });

  auto* sw = app.add_subcommand("sweep", "grid search over loss weights");
  TrainCli sweep_cli;
  std::string sweep_l1, sweep_l2;
  sweep_cli.add_common(sw, /*skip_lambdas=*/true);
  sw->add_option("--lambda1", sweep_l1, "comma list of lambda1 values")->required();
  sw->add_option("--lambda2", sweep_l2, "comma list of lambda2 values (default: config value)");
  sw->callback([&] { cmd_sweep(sweep_cli, sweep_l1, sweep_l2); });

  auto* ab = app.add_subcommand("ablate", "run the four-arm loss ablation");
  TrainCli ablate_cli;
  bool keep_ce = false;
  ablate_cli.add_common(ab);
  ab->add_flag("--keep-ce", keep_ce, "keep the plain CE term in the tpkl_only arm");
  ab->callback([&] { cmd_ablate(ablate_cli, keep_ce); });

  auto* cg = app.add_subcommand("check-grads", "finite-difference audit of all gradients");
  std::uint64_t cg_seed = 7;
  int cg_instances = 100;
  cg->add_option("--seed", cg_seed, "random seed");
  cg->add_option("--instances", cg_instances, "number of random configurations");
  cg->callback([&] { cmd_check_grads(cg_seed, cg_instances); });

  auto* de = app.add_subcommand("dump-embeddings",
                                "write adapter-transformed features for plotting");
  TrainCli dump_cli;
  std::string adapter_path;
  dump_cli.add_common(de);
  de->add_option("--adapter", adapter_path, "trained adapter JSON (omit for raw features)");
  de->callback([&] { cmd_dump_embeddings(dump_cli, adapter_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << error_json("bad_usage", e.what()) << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << error_json(e.code(), e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal_error", e.what()) << "\n";
    return 1;
  }
  return 0;
}
