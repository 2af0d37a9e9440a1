#include "hierloss/synth.hpp"

#include <random>

#include "hierloss/error.hpp"

namespace hierloss {

void SynthSpec::validate() const {
  if (branching.empty()) fail("bad_spec", "branching list is empty");
  for (int b : branching)
    if (b < 1) fail("bad_spec", "branching factors must be >= 1");
  if (feature_dim == 0) fail("bad_spec", "feature_dim must be >= 1");
  if (samples_per_leaf < 1) fail("bad_spec", "samples_per_leaf must be >= 1");
  if (!(spread > 0.0)) fail("bad_spec", "spread must be positive");
  if (signal < 0.0) fail("bad_spec", "signal must be nonnegative");
}

DataBundle generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  DataBundle out;
  out.taxonomy = Taxonomy::balanced(spec.branching);
  const Taxonomy& tax = out.taxonomy;
  std::size_t levels = tax.level_count();
  std::size_t dim = spec.feature_dim;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Class means, level by level: children scatter around their parent.
  std::vector<Matrix> means;
  for (std::size_t l = 0; l < levels; ++l) {
    int n_classes = tax.class_count(l);
    Matrix m(static_cast<std::size_t>(n_classes), dim);
    for (int c = 0; c < n_classes; ++c) {
      double scale = l == 0 ? 1.0 : spec.signal;
      for (std::size_t j = 0; j < dim; ++j) {
        double base = l == 0 ? 0.0 : means[l - 1](tax.parent_of(l, c), j);
        m(static_cast<std::size_t>(c), j) = base + scale * gauss(rng);
      }
    }
    means.push_back(std::move(m));
  }

  int n_leaves = tax.class_count(levels - 1);
  std::size_t n = static_cast<std::size_t>(n_leaves) * spec.samples_per_leaf;
  out.dataset.features = Matrix(n, dim);
  out.dataset.level_sizes = tax.level_sizes();
  out.dataset.labels.reserve(n * levels);

  std::size_t row = 0;
  for (int leaf = 0; leaf < n_leaves; ++leaf) {
    LabelPath path = tax.ancestor_path(leaf);
    for (int s = 0; s < spec.samples_per_leaf; ++s, ++row) {
      for (std::size_t j = 0; j < dim; ++j)
        out.dataset.features(row, j) =
            means[levels - 1](static_cast<std::size_t>(leaf), j) + spec.spread * gauss(rng);
      for (int id : path) out.dataset.labels.push_back(id);
    }
  }

  // Class embeddings: per-class mean of the generated features, so cosine
  // scores are informative before any training.
  for (std::size_t l = 0; l < levels; ++l) {
    int n_classes = tax.class_count(l);
    Matrix emb(static_cast<std::size_t>(n_classes), dim);
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
      int c = out.dataset.label_at(i, l);
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) emb(static_cast<std::size_t>(c), j) += out.dataset.features(i, j);
    }
    for (int c = 0; c < n_classes; ++c)
      for (std::size_t j = 0; j < dim; ++j)
        emb(static_cast<std::size_t>(c), j) /= static_cast<double>(counts[c]);
    out.embeddings.per_level.push_back(std::move(emb));
  }
  return out;
}

SynthSpec standard_benchmark_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.branching = {3, 3, 3};
  spec.feature_dim = 16;
  spec.samples_per_leaf = 20;
  spec.spread = 0.75;
  spec.signal = 0.35;
  spec.seed = seed;
  return spec;
}

}  // namespace hierloss
