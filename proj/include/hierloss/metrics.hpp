#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierloss/taxonomy.hpp"

namespace hierloss {

// Predicted and ground-truth class ids for N samples across all levels,
// both stored row-major N x L, ordered coarse -> fine.
struct PredictionSet {
  std::size_t n = 0;
  std::size_t levels = 0;
  std::vector<int> pred;
  std::vector<int> truth;

  int pred_at(std::size_t i, std::size_t l) const { return pred[i * levels + l]; }
  int truth_at(std::size_t i, std::size_t l) const { return truth[i * levels + l]; }
  LabelPath pred_path(std::size_t i) const;
  LabelPath truth_path(std::size_t i) const;
};

struct EvalReport {
  std::size_t samples = 0;
  std::vector<double> per_level_accuracy;
  double macro_accuracy = 0.0;
  double wap = 0.0;
  double tice = 0.0;
  double fpa = 0.0;
  std::size_t invalid_paths = 0;

  nlohmann::ordered_json to_json() const;
  std::string table(const Taxonomy& taxonomy) const;
};

// Fraction correct at each level; macro accuracy is their unweighted mean.
std::vector<double> level_accuracy(const PredictionSet& preds);
double macro_accuracy(const PredictionSet& preds);

// Per-class precision macro-averaged within each level, then combined with
// weights proportional to the class count of the level. Classes that are never
// predicted contribute precision 0.
double weighted_ap(const PredictionSet& preds, const Taxonomy& taxonomy);

// Fraction of samples whose predicted ids do not form a valid root-to-leaf path.
double tice(const PredictionSet& preds, const Taxonomy& taxonomy);

// Fraction of samples predicted correctly at every level simultaneously.
double fpa(const PredictionSet& preds);

EvalReport evaluate(const PredictionSet& preds, const Taxonomy& taxonomy);

// CSV with one row per sample: sample_id, pred ids 1..L, true ids 1..L.
PredictionSet load_predictions_csv(const std::string& path);
void save_predictions_csv(const std::string& path, const PredictionSet& preds);

}  // namespace hierloss
