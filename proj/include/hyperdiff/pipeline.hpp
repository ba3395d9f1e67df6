#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperdiff/classifier.hpp"
#include "hyperdiff/diffusion.hpp"
#include "hyperdiff/hypergraph.hpp"
#include "hyperdiff/matrix.hpp"

namespace hyperdiff {

inline constexpr double kDefaultSmoothing = 1e-6;

// One-hot n x c matrix with rows set only for `labeled`.
DenseMatrix label_matrix(std::span<const std::size_t> labels, std::span<const std::size_t> labeled,
                         std::size_t num_nodes, std::size_t classes);

/// U = (1 - eps) [Y X] + eps. `x` may be absent (label-only input).
/// Throws NegativeFeature, EpsilonOutOfRange, ShapeMismatch.
EmbeddingMatrix assemble_input(const DenseMatrix& y, const DenseMatrix* x, double epsilon);

/// Content-addressed store of diffusion results keyed on
/// (hypergraph hash, input hash, alpha, mixing, tol, max_iters).
/// Thread-safe. Optionally mirrors entries to a directory so separate
/// processes share them.
class DiffusionCache {
 public:
  struct Key {
    std::uint64_t graph_hash = 0;
    std::uint64_t input_hash = 0;
    double alpha = 0.0;
    int mix_kind = 0;
    double p = 0.0;
    double tol = 0.0;
    std::size_t max_iters = 0;

    auto operator<=>(const Key&) const = default;
    std::string file_stem() const;
  };

  DiffusionCache() = default;
  explicit DiffusionCache(std::filesystem::path directory);

  static Key make_key(const Hypergraph& h, const EmbeddingMatrix& u, const DiffusionConfig& cfg);

  // Returns the cached result or runs the diffusion.
  DiffusionResult get_or_compute(const Hypergraph& h, const DegreeData& deg,
                                 const EmbeddingMatrix& u, const DiffusionConfig& cfg);
  std::optional<DiffusionResult> lookup(const Key& key);
  void store(const Key& key, const DiffusionResult& result);

  std::size_t hits() const;
  std::size_t misses() const;
  // Total iterations executed by diffusions this cache ran.
  std::size_t diffusion_iterations() const;

 private:
  mutable std::mutex mutex_;
  std::map<Key, DiffusionResult> entries_;
  std::optional<std::filesystem::path> directory_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
  std::size_t iterations_ = 0;
};

// Label-only input (labels of `labeled` nodes), diffused.
EmbeddingMatrix embed_e1(const Hypergraph& h, const DegreeData& deg, const DenseMatrix& y,
                         const DiffusionConfig& cfg, double epsilon = kDefaultSmoothing,
                         DiffusionCache* cache = nullptr);
// Labels and features, diffused jointly.
EmbeddingMatrix embed_e3(const Hypergraph& h, const DegreeData& deg, const DenseMatrix& y,
                         const DenseMatrix& x, const DiffusionConfig& cfg,
                         double epsilon = kDefaultSmoothing, DiffusionCache* cache = nullptr);

struct SplitSpec {
  std::vector<std::size_t> train_ids;  // labeled set T (explicit) ...
  double fraction = 0.0;               // ... or sampled with this fraction
  std::uint64_t seed = 0;
  bool label_balanced = true;
};

/// Label-balanced sample of round(fraction * n) nodes: floor(total / c) per
/// class, remainder to the largest classes, capped at class size.
std::vector<std::size_t> sample_labeled(std::span<const std::size_t> labels, std::size_t classes,
                                        double fraction, std::uint64_t seed);

struct HalfSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Per-class 50/50 split of `labeled`; odd counts put the extra node in the
/// training half so every class present stays trainable.
HalfSplit balanced_half_split(std::span<const std::size_t> labeled,
                              std::span<const std::size_t> labels, std::uint64_t seed);

struct CVGrid {
  std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> ps{1, 2, 3, 5, 10};
  std::size_t repeats = 5;

  void validate() const;
};

struct CVCell {
  double alpha = 0.0;
  double p = 0.0;
  std::vector<double> accuracies;  // one per repeat
  double mean = 0.0;
  double stddev = 0.0;
  // Mean validation cross-entropy; breaks accuracy ties, which are common
  // when the validation halves hold only a few nodes.
  double log_loss = 0.0;
  std::size_t unconverged = 0;  // diffusions that hit max_iters
};

struct CVResult {
  std::vector<CVCell> cells;  // alpha-major, then p
  double best_alpha = 0.0;
  double best_p = 0.0;
  std::vector<std::uint64_t> repeat_seeds;
  double diffusion_ms = 0.0;
  double training_ms = 0.0;
};

struct ExperimentOptions {
  double epsilon = kDefaultSmoothing;
  double tol = 1e-6;
  std::size_t max_iters = 500;
  TrainConfig train;
  bool use_features = true;  // E3 when true and features exist, else E1
};

/// Hyperparameter selection on the labeled set: every repeat splits
/// `split.train_ids` 50/50, diffuses with only the training-half labels,
/// trains on that half and scores the other. Selects the cell with the best
/// mean validation accuracy; ties go to the lower mean validation
/// cross-entropy, then to smaller alpha and smaller p.
/// Throws MissingClassInTrain.
CVResult run_cv(const Hypergraph& h, const DegreeData& deg, std::span<const std::size_t> labels,
                std::size_t classes, const DenseMatrix* x, const CVGrid& grid,
                const SplitSpec& split, const ExperimentOptions& opts, DiffusionCache& cache);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // n - 1 denominator; 0 for a single value
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

struct SampleOutcome {
  std::uint64_t seed = 0;
  std::vector<std::size_t> labeled;
  CVResult cv;
  double test_accuracy = 0.0;
  double diffusion_ms = 0.0;
  double training_ms = 0.0;
};

struct EvaluationReport {
  std::vector<SampleOutcome> samples;
  Summary accuracy;
  double diffusion_ms = 0.0;
  double training_ms = 0.0;
  CVGrid grid;
  // Mean validation accuracy per cell averaged over samples (alpha-major).
  std::vector<CVCell> mean_grid;
};

/// Aggregates per-sample test accuracies and phase timings.
EvaluationReport evaluate(std::vector<SampleOutcome> samples, const CVGrid& grid);

/// Full protocol: for each of `samples` seeds draw a label-balanced labeled
/// set with `labeled_fraction`, pick (alpha, p) by run_cv, diffuse with all
/// labeled nodes, train on them and test on every other node.
EvaluationReport run_experiment(const Hypergraph& h, const DegreeData& deg,
                                std::span<const std::size_t> labels, std::size_t classes,
                                const DenseMatrix* x, const CVGrid& grid, double labeled_fraction,
                                std::size_t samples, std::uint64_t seed,
                                const ExperimentOptions& opts, DiffusionCache& cache);

}  // namespace hyperdiff
