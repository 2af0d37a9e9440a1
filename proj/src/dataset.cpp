#include "hierloss/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hierloss/error.hpp"

namespace hierloss {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

// Parses "#k1=v1 k2=v2 ..." header lines.
std::string header_value(const std::string& line, const std::string& key) {
  std::string needle = key + "=";
  std::size_t pos = line.find(needle);
  if (pos == std::string::npos)
    fail("bad_format", "missing '" + key + "' in header line: " + line);
  std::size_t start = pos + needle.size();
  std::size_t end = line.find(' ', start);
  return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

std::vector<int> parse_sizes(const std::string& csv) {
  std::vector<int> sizes;
  for (const std::string& f : split(csv, ',')) sizes.push_back(std::stoi(f));
  return sizes;
}

void expect_magic(std::istream& in, const std::string& magic, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line != magic)
    fail("bad_format", "file '" + path + "' does not start with '" + magic + "'");
}

}  // namespace

void validate_dataset(const FeatureDataset& dataset, const Taxonomy& taxonomy) {
  if (dataset.levels() != taxonomy.level_count())
    fail("shape_mismatch", "dataset level count does not match taxonomy");
  for (std::size_t l = 0; l < dataset.levels(); ++l)
    if (dataset.level_sizes[l] != taxonomy.class_count(l))
      fail("shape_mismatch", "dataset class counts do not match taxonomy");
  if (!dataset.features.all_finite())
    fail("nonfinite_features", "feature matrix contains NaN or Inf");
  for (std::size_t i = 0; i < dataset.n(); ++i)
    if (!taxonomy.is_valid_path(dataset.label_path(i)))
      fail("invalid_label_path", "sample " + std::to_string(i) +
                                     " label row is not a valid taxonomy path");
}

void validate_embeddings(const ClassEmbeddings& embeddings, const Taxonomy& taxonomy) {
  if (embeddings.levels() != taxonomy.level_count())
    fail("shape_mismatch", "embedding level count does not match taxonomy");
  for (std::size_t l = 0; l < embeddings.levels(); ++l) {
    if (embeddings.per_level[l].rows != static_cast<std::size_t>(taxonomy.class_count(l)))
      fail("shape_mismatch", "embedding rows do not match class count at level " +
                                 std::to_string(l));
    if (!embeddings.per_level[l].all_finite())
      fail("nonfinite_features", "class embeddings contain NaN or Inf");
  }
}

FeatureDataset load_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("missing_file", "cannot open feature file '" + path + "'");
  expect_magic(in, "#hierloss-features v1", path);

  std::string header;
  if (!std::getline(in, header))
    fail("bad_format", "feature file '" + path + "' is truncated");
  std::size_t n = std::stoul(header_value(header, "n"));
  std::size_t dim = std::stoul(header_value(header, "dim"));
  std::size_t levels = std::stoul(header_value(header, "levels"));
  std::vector<int> sizes = parse_sizes(header_value(header, "sizes"));
  if (sizes.size() != levels)
    fail("bad_format", "sizes list does not match level count in '" + path + "'");

  std::string line;
  std::getline(in, line);  // column-name row

  FeatureDataset ds;
  ds.features = Matrix(n, dim);
  ds.level_sizes = sizes;
  ds.labels.reserve(n * levels);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      fail("bad_format", "feature file '" + path + "' has fewer rows than header n");
    std::vector<std::string> fields = split(line, ',');
    if (fields.size() != dim + levels)
      fail("bad_format", "row " + std::to_string(i) + " has wrong field count");
    for (std::size_t j = 0; j < dim; ++j) ds.features(i, j) = std::stod(fields[j]);
    for (std::size_t l = 0; l < levels; ++l) {
      int id = std::stoi(fields[dim + l]);
      if (id < 0 || id >= sizes[l])
        fail("bad_class_id", "row " + std::to_string(i) + " label out of range");
      ds.labels.push_back(id);
    }
  }
  return ds;
}

void save_features_csv(const std::string& path, const FeatureDataset& dataset) {
  std::ofstream out(path);
  if (!out) fail("io_error", "cannot write feature file '" + path + "'");
  out << "#hierloss-features v1\n";
  out << "#n=" << dataset.n() << " dim=" << dataset.dim() << " levels=" << dataset.levels()
      << " sizes=";
  for (std::size_t l = 0; l < dataset.levels(); ++l)
    out << (l ? "," : "") << dataset.level_sizes[l];
  out << "\n";
  for (std::size_t j = 0; j < dataset.dim(); ++j) out << (j ? "," : "") << "f" << j;
  for (std::size_t l = 1; l <= dataset.levels(); ++l) out << ",y" << l;
  out << "\n";
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    for (std::size_t j = 0; j < dataset.dim(); ++j)
      out << (j ? "," : "") << format_double(dataset.features(i, j));
    for (std::size_t l = 0; l < dataset.levels(); ++l) out << "," << dataset.label_at(i, l);
    out << "\n";
  }
}

ClassEmbeddings load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("missing_file", "cannot open embedding file '" + path + "'");
  expect_magic(in, "#hierloss-embeddings v1", path);

  std::string header;
  if (!std::getline(in, header))
    fail("bad_format", "embedding file '" + path + "' is truncated");
  std::size_t dim = std::stoul(header_value(header, "dim"));
  std::size_t levels = std::stoul(header_value(header, "levels"));
  std::vector<int> sizes = parse_sizes(header_value(header, "sizes"));
  if (sizes.size() != levels)
    fail("bad_format", "sizes list does not match level count in '" + path + "'");

  std::string line;
  std::getline(in, line);  // column-name row

  ClassEmbeddings emb;
  for (int c : sizes) emb.per_level.emplace_back(static_cast<std::size_t>(c), dim);
  for (std::size_t l = 0; l < levels; ++l) {
    for (int c = 0; c < sizes[l]; ++c) {
      if (!std::getline(in, line))
        fail("bad_format", "embedding file '" + path + "' is truncated");
      std::vector<std::string> fields = split(line, ',');
      if (fields.size() != dim + 2)
        fail("bad_format", "embedding row has wrong field count");
      if (std::stoul(fields[0]) != l + 1 || std::stoi(fields[1]) != c)
        fail("bad_format", "embedding rows out of order (expected level " +
                               std::to_string(l + 1) + " class " + std::to_string(c) + ")");
      for (std::size_t j = 0; j < dim; ++j)
        emb.per_level[l](static_cast<std::size_t>(c), j) = std::stod(fields[2 + j]);
    }
  }
  return emb;
}

void save_embeddings_csv(const std::string& path, const ClassEmbeddings& embeddings) {
  std::ofstream out(path);
  if (!out) fail("io_error", "cannot write embedding file '" + path + "'");
  std::size_t dim = embeddings.dim();
  out << "#hierloss-embeddings v1\n";
  out << "#dim=" << dim << " levels=" << embeddings.levels() << " sizes=";
  for (std::size_t l = 0; l < embeddings.levels(); ++l)
    out << (l ? "," : "") << embeddings.per_level[l].rows;
  out << "\n";
  out << "level,class_id";
  for (std::size_t j = 0; j < dim; ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t l = 0; l < embeddings.levels(); ++l) {
    const Matrix& m = embeddings.per_level[l];
    for (std::size_t c = 0; c < m.rows; ++c) {
      out << (l + 1) << "," << c;
      for (std::size_t j = 0; j < dim; ++j) out << "," << format_double(m(c, j));
      out << "\n";
    }
  }
}

DataBundle load_bundle(const std::string& taxonomy_path, const std::string& features_path,
                       const std::string& embeddings_path) {
  DataBundle bundle;
  bundle.taxonomy = Taxonomy::load_file(taxonomy_path);
  bundle.dataset = load_features_csv(features_path);
  bundle.embeddings = load_embeddings_csv(embeddings_path);
  validate_dataset(bundle.dataset, bundle.taxonomy);
  validate_embeddings(bundle.embeddings, bundle.taxonomy);
  return bundle;
}

}  // namespace hierloss
