#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hyperdiff/classifier.hpp"
#include "hyperdiff/diffusion.hpp"
#include "hyperdiff/hypergraph.hpp"
#include "hyperdiff/matrix.hpp"

namespace hyperdiff {

// Hyperedge file: one hyperedge per line, whitespace-separated 0-based node
// ids. Blank lines and lines starting with '#' are skipped.
std::vector<std::vector<std::size_t>> read_hyperedges(const std::filesystem::path& path);
std::vector<double> read_weights(const std::filesystem::path& path);
void write_hypergraph(const Hypergraph& h, const std::filesystem::path& edges_path,
                      const std::optional<std::filesystem::path>& weights_path);

// Dense CSV (n rows, d comma-separated values) or "row col value" triples.
enum class FeatureFormat { DenseCsv, Triples };
DenseMatrix read_features(const std::filesystem::path& path, FeatureFormat format,
                          std::size_t rows, std::size_t cols);
void write_features_csv(const DenseMatrix& x, const std::filesystem::path& path);

// "node_id class_id" lines.
std::vector<std::size_t> read_labels(const std::filesystem::path& path, std::size_t num_nodes);
// One node id per line.
std::vector<std::size_t> read_id_list(const std::filesystem::path& path);
void write_id_list(const std::vector<std::size_t>& ids, const std::filesystem::path& path);

struct DatasetManifest {
  std::string name;
  std::filesystem::path hyperedges_path;
  std::optional<std::filesystem::path> weights_path;
  std::optional<std::filesystem::path> features_path;
  FeatureFormat features_format = FeatureFormat::DenseCsv;
  std::filesystem::path labels_path;
  std::optional<std::filesystem::path> train_ids_path;
  bool self_loops = false;
  std::size_t n = 0, m = 0, d = 0, c = 0;
};

// JSON manifest; relative paths resolve against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct Dataset {
  DatasetManifest manifest;
  Hypergraph hypergraph;
  std::optional<DenseMatrix> features;
  std::vector<std::size_t> labels;
};

// Throws ParseError, DimensionMismatch, IsolatedNode.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Binary embedding file, little-endian:
///   8  bytes magic "HDIFEMB\0"
///   u32 version (1), u32 reserved (0)
///   u64 rows, u64 cols, u64 label_cols, u64 feature_cols
///   rows * cols f64, row-major
void save_embedding(const EmbeddingMatrix& f, const std::filesystem::path& path);
EmbeddingMatrix load_embedding(const std::filesystem::path& path);
void write_embedding(const EmbeddingMatrix& f, std::ostream& out);
EmbeddingMatrix read_embedding(std::istream& in);

// iter,residual,phi,elapsed_ms
void write_diagnostics_csv(const DiffusionResult& result, const std::filesystem::path& path);

/// Text model file:
///   hyperdiff-softmax,1,<k>,<c>
///   mean,<k values>
///   scale,<k values>
///   <k + 1 rows of c values>
void save_model(const SoftmaxModel& model, const std::filesystem::path& path);
SoftmaxModel load_model(const std::filesystem::path& path);

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

}  // namespace hyperdiff
