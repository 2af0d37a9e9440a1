#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hierloss/matrix.hpp"
#include "hierloss/taxonomy.hpp"

namespace hierloss {

// N precomputed feature vectors plus the N x L ground-truth label table
// (dense class ids, coarse -> fine).
struct FeatureDataset {
  Matrix features;  // N x dim
  std::vector<int> labels;
  std::vector<int> level_sizes;

  std::size_t n() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
  std::size_t levels() const { return level_sizes.size(); }
  int label_at(std::size_t i, std::size_t l) const { return labels[i * levels() + l]; }
  LabelPath label_path(std::size_t i) const {
    return LabelPath(labels.begin() + i * levels(), labels.begin() + (i + 1) * levels());
  }
};

// Per level, a C_l x dim matrix of class text/prototype embeddings.
struct ClassEmbeddings {
  std::vector<Matrix> per_level;

  std::size_t levels() const { return per_level.size(); }
  std::size_t dim() const { return per_level.empty() ? 0 : per_level[0].cols; }
};

// Taxonomy + features + class embeddings for one experiment.
struct DataBundle {
  Taxonomy taxonomy;
  FeatureDataset dataset;
  ClassEmbeddings embeddings;
};

// Every label row must be a valid root-to-leaf path of the taxonomy.
void validate_dataset(const FeatureDataset& dataset, const Taxonomy& taxonomy);
void validate_embeddings(const ClassEmbeddings& embeddings, const Taxonomy& taxonomy);

// Feature file: '#hierloss-features v1' magic, a '#n=.. dim=.. levels=.. sizes=..'
// header, a column-name row, then one CSV row per sample (dim floats, L ids).
FeatureDataset load_features_csv(const std::string& path);
void save_features_csv(const std::string& path, const FeatureDataset& dataset);

// Embedding file: '#hierloss-embeddings v1' magic and the same style of header;
// rows are level,class_id,f0..f{dim-1} with 1-based level numbers.
ClassEmbeddings load_embeddings_csv(const std::string& path);
void save_embeddings_csv(const std::string& path, const ClassEmbeddings& embeddings);

DataBundle load_bundle(const std::string& taxonomy_path, const std::string& features_path,
                       const std::string& embeddings_path);

}  // namespace hierloss
