#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hyperdiff/matrix.hpp"

namespace hyperdiff {

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  // z-score embedding columns (statistics over all rows) before the linear
  // layer. Embeddings on the phi = 1 slice have tiny entries; without this the
  // fixed-step descent barely moves.
  bool standardize = true;

  void validate() const;
};

/// Multinomial logistic regression on embedding rows.
/// theta is (k + 1) x c; the last row multiplies the constant-1 bias column.
struct SoftmaxModel {
  DenseMatrix theta;
  std::size_t classes = 0;
  std::vector<double> column_mean;   // length k; zeros when not standardized
  std::vector<double> column_scale;  // length k; ones when not standardized
  // Training objective after each epoch (index 0 = initial point).
  std::vector<double> loss_history;

  std::size_t input_dim() const { return column_mean.size(); }
};

struct Prediction {
  std::vector<std::size_t> classes;
  DenseMatrix probabilities;  // rows sum to 1
};

// Throws EmptyTrainingSet, ClassOutOfRange, ShapeMismatch.
SoftmaxModel train_softmax(const EmbeddingMatrix& f, std::span<const std::size_t> labels,
                           std::span<const std::size_t> train_ids, std::size_t classes,
                           const TrainConfig& cfg = {});

// Ties go to the lowest class index. Throws ShapeMismatch.
Prediction predict(const SoftmaxModel& model, const EmbeddingMatrix& f);

// Fraction of eval_ids with pred == truth. Throws EmptyEvalSet.
double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                std::span<const std::size_t> eval_ids);

// Row-wise softmax of a logits matrix, max-shifted.
DenseMatrix softmax_rows(const DenseMatrix& logits);

// Mean cross-entropy over `rows` (rows of x are already bias-augmented)
// plus (l2 / 2) ||theta||^2. Fills `grad` (same shape as theta) when non-null.
double softmax_objective(const DenseMatrix& x, std::span<const std::size_t> labels,
                         std::span<const std::size_t> rows, const DenseMatrix& theta, double l2,
                         DenseMatrix* grad);

}  // namespace hyperdiff
