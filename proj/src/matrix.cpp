#include "hyperdiff/matrix.hpp"

#include <cmath>
#include <string>

#include "hyperdiff/error.hpp"

namespace hyperdiff {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IsolatedNode: return "IsolatedNode";
    case ErrorKind::EmptyHyperedge: return "EmptyHyperedge";
    case ErrorKind::NonpositiveWeight: return "NonpositiveWeight";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NonFiniteResult: return "NonFiniteResult";
    case ErrorKind::ZeroNormalizer: return "ZeroNormalizer";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyEvalSet: return "EmptyEvalSet";
    case ErrorKind::NegativeFeature: return "NegativeFeature";
    case ErrorKind::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorKind::MissingClassInTrain: return "MissingClassInTrain";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch, "matrix data has " + std::to_string(data_.size()) +
                                              " values, expected " + std::to_string(rows * cols));
  }
}

void DenseMatrix::set_blocks(std::size_t label_cols, std::size_t feature_cols) {
  if (label_cols + feature_cols != 0 && label_cols + feature_cols != cols_) {
    throw Error(ErrorKind::ShapeMismatch, "column blocks do not cover the matrix");
  }
  label_cols_ = label_cols;
  feature_cols_ = feature_cols;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 32;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

// Squared entries summed per fixed-size chunk, then pairwise.
template <class F>
double chunked_square_sum(std::size_t n, F&& term) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> partial((n + kChunk - 1) / kChunk, 0.0);
  for (std::size_t c = 0; c < partial.size(); ++c) {
    double s = 0.0;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double t = term(i);
      s += t * t;
    }
    partial[c] = s;
  }
  return pairwise_sum(partial);
}

}  // namespace

double frobenius_norm(const DenseMatrix& a) {
  auto v = a.values();
  return std::sqrt(chunked_square_sum(v.size(), [&](std::size_t i) { return v[i]; }));
}

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "frobenius_distance: shapes differ");
  }
  auto va = a.values();
  auto vb = b.values();
  return std::sqrt(chunked_square_sum(va.size(), [&](std::size_t i) { return va[i] - vb[i]; }));
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "max_abs_difference: shapes differ");
  }
  double m = 0.0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) m = std::max(m, std::abs(va[i] - vb[i]));
  return m;
}

bool all_finite(const DenseMatrix& a) {
  for (double v : a.values())
    if (!std::isfinite(v)) return false;
  return true;
}

bool all_positive(const DenseMatrix& a) {
  for (double v : a.values())
    if (!(v > 0.0)) return false;
  return true;
}

bool all_nonnegative(const DenseMatrix& a) {
  for (double v : a.values())
    if (!(v >= 0.0)) return false;
  return true;
}

void scale_in_place(DenseMatrix& a, double factor) {
  for (double& v : a.values()) v *= factor;
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
  DenseMatrix out = a;
  scale_in_place(out, factor);
  return out;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "multiply: inner dims differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ail * b(l, j);
    }
  return out;
}

}  // namespace hyperdiff
