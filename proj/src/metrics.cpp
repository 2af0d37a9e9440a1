#include "hierloss/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hierloss/error.hpp"

namespace hierloss {

namespace {

void check_nonempty(const PredictionSet& preds) {
  if (preds.n == 0) fail("empty_set", "prediction set is empty");
  if (preds.levels == 0) fail("empty_set", "prediction set has no levels");
  if (preds.pred.size() != preds.n * preds.levels ||
      preds.truth.size() != preds.n * preds.levels)
    fail("shape_mismatch", "prediction tables do not match n x levels");
}

void check_ranges(const PredictionSet& preds, const Taxonomy& taxonomy) {
  if (preds.levels != taxonomy.level_count())
    fail("shape_mismatch", "prediction level count does not match taxonomy");
  for (std::size_t l = 0; l < preds.levels; ++l) {
    int n_classes = taxonomy.class_count(l);
    for (std::size_t i = 0; i < preds.n; ++i) {
      if (preds.pred_at(i, l) < 0 || preds.pred_at(i, l) >= n_classes ||
          preds.truth_at(i, l) < 0 || preds.truth_at(i, l) >= n_classes)
        fail("bad_class_id", "prediction id out of range at level " + std::to_string(l));
    }
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

LabelPath PredictionSet::pred_path(std::size_t i) const {
  return LabelPath(pred.begin() + i * levels, pred.begin() + (i + 1) * levels);
}

LabelPath PredictionSet::truth_path(std::size_t i) const {
  return LabelPath(truth.begin() + i * levels, truth.begin() + (i + 1) * levels);
}

std::vector<double> level_accuracy(const PredictionSet& preds) {
  check_nonempty(preds);
  std::vector<double> acc(preds.levels, 0.0);
  for (std::size_t l = 0; l < preds.levels; ++l) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.n; ++i)
      if (preds.pred_at(i, l) == preds.truth_at(i, l)) ++correct;
    acc[l] = static_cast<double>(correct) / static_cast<double>(preds.n);
  }
  return acc;
}

double macro_accuracy(const PredictionSet& preds) {
  std::vector<double> acc = level_accuracy(preds);
  double sum = 0.0;
  for (double a : acc) sum += a;
  return sum / static_cast<double>(acc.size());
}

double weighted_ap(const PredictionSet& preds, const Taxonomy& taxonomy) {
  check_nonempty(preds);
  check_ranges(preds, taxonomy);
  std::vector<int> sizes = taxonomy.level_sizes();
  double total_classes = 0.0;
  for (int c : sizes) total_classes += c;

  double wap = 0.0;
  for (std::size_t l = 0; l < preds.levels; ++l) {
    std::vector<std::size_t> predicted(sizes[l], 0), correct(sizes[l], 0);
    for (std::size_t i = 0; i < preds.n; ++i) {
      int p = preds.pred_at(i, l);
      ++predicted[p];
      if (p == preds.truth_at(i, l)) ++correct[p];
    }
    double precision_sum = 0.0;
    for (int c = 0; c < sizes[l]; ++c)
      if (predicted[c] > 0)
        precision_sum += static_cast<double>(correct[c]) / static_cast<double>(predicted[c]);
    double p_l = precision_sum / static_cast<double>(sizes[l]);
    wap += (static_cast<double>(sizes[l]) / total_classes) * p_l;
  }
  return wap;
}

double tice(const PredictionSet& preds, const Taxonomy& taxonomy) {
  check_nonempty(preds);
  check_ranges(preds, taxonomy);
  std::size_t inconsistent = 0;
  for (std::size_t i = 0; i < preds.n; ++i)
    if (!taxonomy.is_valid_path(preds.pred_path(i))) ++inconsistent;
  return static_cast<double>(inconsistent) / static_cast<double>(preds.n);
}

double fpa(const PredictionSet& preds) {
  check_nonempty(preds);
  std::size_t all_correct = 0;
  for (std::size_t i = 0; i < preds.n; ++i) {
    bool ok = true;
    for (std::size_t l = 0; l < preds.levels && ok; ++l)
      ok = preds.pred_at(i, l) == preds.truth_at(i, l);
    if (ok) ++all_correct;
  }
  return static_cast<double>(all_correct) / static_cast<double>(preds.n);
}

EvalReport evaluate(const PredictionSet& preds, const Taxonomy& taxonomy) {
  check_nonempty(preds);
  check_ranges(preds, taxonomy);
  EvalReport report;
  report.samples = preds.n;
  report.per_level_accuracy = level_accuracy(preds);
  double sum = 0.0;
  for (double a : report.per_level_accuracy) sum += a;
  report.macro_accuracy = sum / static_cast<double>(report.per_level_accuracy.size());
  report.wap = weighted_ap(preds, taxonomy);
  std::size_t inconsistent = 0;
  for (std::size_t i = 0; i < preds.n; ++i)
    if (!taxonomy.is_valid_path(preds.pred_path(i))) ++inconsistent;
  report.invalid_paths = inconsistent;
  report.tice = static_cast<double>(inconsistent) / static_cast<double>(preds.n);
  report.fpa = fpa(preds);
  return report;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["samples"] = samples;
  j["per_level_accuracy"] = per_level_accuracy;
  j["macro_accuracy"] = macro_accuracy;
  j["wap"] = wap;
  j["tice"] = tice;
  j["fpa"] = fpa;
  j["invalid_paths"] = invalid_paths;
  return j;
}

std::string EvalReport::table(const Taxonomy& taxonomy) const {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-18s %zu\n", "samples", samples);
  out += buf;
  for (std::size_t l = 0; l < per_level_accuracy.size(); ++l) {
    std::string label = taxonomy.level_name(l) + " accuracy";
    std::snprintf(buf, sizeof(buf), "%-18s %.4f\n", label.c_str(), per_level_accuracy[l]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-18s %.4f\n", "macro accuracy", macro_accuracy);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %.4f\n", "wAP", wap);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %.4f\n", "TICE", tice);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %.4f\n", "FPA", fpa);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %zu\n", "invalid paths", invalid_paths);
  out += buf;
  return out;
}

PredictionSet load_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("missing_file", "cannot open prediction file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail("bad_predictions", "prediction file is empty");
  std::vector<std::string> header = split_csv(line);
  if (header.size() < 3 || header[0] != "sample_id" || header.size() % 2 == 0)
    fail("bad_predictions", "prediction header must be sample_id,pred_1..L,true_1..L");
  std::size_t levels = (header.size() - 1) / 2;

  PredictionSet preds;
  preds.levels = levels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv(line);
    if (fields.size() != header.size())
      fail("bad_predictions", "line " + std::to_string(lineno) + ": wrong field count");
    try {
      for (std::size_t l = 0; l < levels; ++l) preds.pred.push_back(std::stoi(fields[1 + l]));
      for (std::size_t l = 0; l < levels; ++l)
        preds.truth.push_back(std::stoi(fields[1 + levels + l]));
    } catch (const std::exception&) {
      fail("bad_predictions", "line " + std::to_string(lineno) + ": non-integer id");
    }
    ++preds.n;
  }
  if (preds.n == 0) fail("empty_set", "prediction file has no rows");
  return preds;
}

void save_predictions_csv(const std::string& path, const PredictionSet& preds) {
  std::ofstream out(path);
  if (!out) fail("io_error", "cannot write prediction file '" + path + "'");
  out << "sample_id";
  for (std::size_t l = 1; l <= preds.levels; ++l) out << ",pred_" << l;
  for (std::size_t l = 1; l <= preds.levels; ++l) out << ",true_" << l;
  out << "\n";
  for (std::size_t i = 0; i < preds.n; ++i) {
    out << i;
    for (std::size_t l = 0; l < preds.levels; ++l) out << "," << preds.pred_at(i, l);
    for (std::size_t l = 0; l < preds.levels; ++l) out << "," << preds.truth_at(i, l);
    out << "\n";
  }
}

}  // namespace hierloss
