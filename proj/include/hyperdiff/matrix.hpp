#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hyperdiff {

/// Dense row-major matrix of doubles.
///
/// Used for node embeddings (rows = nodes) and for per-hyperedge aggregates
/// (rows = hyperedges). An embedding can carry column block metadata: the
/// first `label_cols()` columns hold label scores and the next
/// `feature_cols()` hold features. Both are zero when unspecified.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::size_t label_cols() const noexcept { return label_cols_; }
  std::size_t feature_cols() const noexcept { return feature_cols_; }
  void set_blocks(std::size_t label_cols, std::size_t feature_cols);

  bool operator==(const DenseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::size_t label_cols_ = 0;
  std::size_t feature_cols_ = 0;
};

using EmbeddingMatrix = DenseMatrix;

// Deterministic pairwise summation: the result depends only on the input
// order, never on how the work was split across threads.
double pairwise_sum(std::span<const double> values);

double frobenius_norm(const DenseMatrix& a);
// ||a - b||_F
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);

bool all_finite(const DenseMatrix& a);
bool all_positive(const DenseMatrix& a);
bool all_nonnegative(const DenseMatrix& a);

void scale_in_place(DenseMatrix& a, double factor);
DenseMatrix scaled(const DenseMatrix& a, double factor);

// Dense product, O(rows * inner * cols). Reference use only.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace hyperdiff
