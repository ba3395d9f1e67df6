#pragma once

// Shared generators and brute-force reference evaluations for the tests.
// Oracles here use direct loops or dense Eigen algebra and never call the
// library's sparse kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hyperdiff/hypergraph.hpp"
#include "hyperdiff/matrix.hpp"

namespace testing_support {

using hyperdiff::DenseMatrix;
using hyperdiff::Hypergraph;
using EdgeLists = std::vector<std::vector<std::size_t>>;

struct RandomInstance {
  EdgeLists edges;
  std::vector<double> weights;
};

// m hyperedges of size [min_size, max_size] over n nodes; uncovered nodes are
// appended to random hyperedges so the result has no isolated nodes.
inline RandomInstance random_instance(std::size_t n, std::size_t m, std::mt19937_64& rng,
                                      std::size_t min_size = 2, std::size_t max_size = 5,
                                      bool integer_weights = false) {
  RandomInstance inst;
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::uniform_int_distribution<std::size_t> size_dist(min_size, std::min(max_size, n));
  std::uniform_real_distribution<double> wreal(0.2, 3.0);
  std::uniform_int_distribution<int> wint(1, 4);
  std::vector<bool> covered(n, false);
  for (std::size_t e = 0; e < m; ++e) {
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<std::size_t> members(ids.begin(), ids.begin() + size_dist(rng));
    for (std::size_t v : members) covered[v] = true;
    inst.edges.push_back(std::move(members));
    inst.weights.push_back(integer_weights ? wint(rng) : wreal(rng));
  }
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (!covered[i]) inst.edges[pick(rng)].push_back(i);
  return inst;
}

inline Hypergraph random_hypergraph(std::size_t n, std::size_t m, std::mt19937_64& rng,
                                    bool integer_weights = false) {
  auto inst = random_instance(n, m, rng, 2, 5, integer_weights);
  return hyperdiff::build_hypergraph(inst.edges, inst.weights, {.num_nodes = n});
}

inline DenseMatrix random_positive(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                   double lo = 0.1, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  DenseMatrix f(rows, cols);
  for (double& v : f.values()) v = dist(rng);
  return f;
}

inline Eigen::MatrixXd to_eigen(const DenseMatrix& a) {
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
  return out;
}

inline DenseMatrix from_eigen(const Eigen::MatrixXd& a) {
  DenseMatrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
  return out;
}

inline Eigen::MatrixXd incidence(const Hypergraph& h) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(h.num_nodes(), h.num_edges());
  for (std::size_t e = 0; e < h.num_edges(); ++e)
    for (std::size_t v : h.members(e)) k(v, e) = 1.0;
  return k;
}

inline Eigen::MatrixXd weight_diag(const Hypergraph& h) {
  Eigen::VectorXd w(h.num_edges());
  for (std::size_t e = 0; e < h.num_edges(); ++e) w(e) = h.weight(e);
  return w.asDiagonal();
}

// D^{-1/2} K W K^T D^{-1/2} from dense products.
inline Eigen::MatrixXd dense_normalized_clique(const Hypergraph& h) {
  const Eigen::MatrixXd k = incidence(h);
  const Eigen::MatrixXd kw = k * weight_diag(h);
  const Eigen::VectorXd delta = kw * Eigen::VectorXd::Ones(h.num_edges());
  const Eigen::VectorXd s = delta.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * (kw * k.transpose()) * s.asDiagonal();
}

inline std::vector<double> loop_degrees(const Hypergraph& h) {
  std::vector<double> delta(h.num_nodes(), 0.0);
  for (std::size_t e = 0; e < h.num_edges(); ++e)
    for (std::size_t v : h.members(e)) delta[v] += h.weight(e);
  return delta;
}

// Textbook p-power mean of the normalized member rows, without any
// stabilization.
inline DenseMatrix loop_mu(const Hypergraph& h, const DenseMatrix& f, double p) {
  const auto delta = loop_degrees(h);
  DenseMatrix mu(h.num_edges(), f.cols());
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    const auto members = h.members(e);
    for (std::size_t c = 0; c < f.cols(); ++c) {
      double s = 0.0;
      for (std::size_t v : members) s += std::pow(f(v, c) / std::sqrt(delta[v]), p);
      mu(e, c) = std::pow(s / static_cast<double>(members.size()), 1.0 / p);
    }
  }
  return mu;
}

inline DenseMatrix loop_diffusion(const Hypergraph& h, const DenseMatrix& f, double p) {
  const auto delta = loop_degrees(h);
  const DenseMatrix mu = loop_mu(h, f, p);
  DenseMatrix out(h.num_nodes(), f.cols());
  for (std::size_t e = 0; e < h.num_edges(); ++e)
    for (std::size_t v : h.members(e))
      for (std::size_t c = 0; c < f.cols(); ++c)
        out(v, c) += h.weight(e) * mu(e, c) / std::sqrt(delta[v]);
  return out;
}

inline double loop_omega(const Hypergraph& h, const DenseMatrix& f, double p, double mu_scale = 1.0) {
  const auto delta = loop_degrees(h);
  const DenseMatrix mu = loop_mu(h, f, p);
  double total = 0.0;
  for (std::size_t e = 0; e < h.num_edges(); ++e)
    for (std::size_t v : h.members(e))
      for (std::size_t c = 0; c < f.cols(); ++c) {
        const double d = f(v, c) / std::sqrt(delta[v]) - mu_scale * mu(e, c);
        total += h.weight(e) * d * d;
      }
  return total;
}

inline double loop_phi(const Hypergraph& h, const DenseMatrix& f, double p) {
  const DenseMatrix mu = loop_mu(h, f, p);
  double s = 0.0;
  for (std::size_t e = 0; e < h.num_edges(); ++e)
    for (std::size_t c = 0; c < f.cols(); ++c) s += h.weight(e) * mu(e, c) * mu(e, c);
  return 2.0 * std::sqrt(s);
}

struct PlantedPartition {
  Hypergraph hypergraph;
  std::vector<std::size_t> labels;
  DenseMatrix features;  // weakly informative, nonnegative
};

// Two equal communities; intra hyperedges draw members from one community,
// cross hyperedges take half their members from each side.
inline PlantedPartition planted_partition(std::size_t n, std::size_t intra, std::size_t cross,
                                          std::mt19937_64& rng) {
  const std::size_t half = n / 2;
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < half ? 0 : 1;
  std::vector<std::vector<std::size_t>> side(2);
  for (std::size_t i = 0; i < n; ++i) side[labels[i]].push_back(i);
  std::uniform_int_distribution<std::size_t> size_dist(4, 8);
  EdgeLists edges;
  std::vector<bool> covered(n, false);
  for (std::size_t e = 0; e < intra; ++e) {
    auto& pool = side[e % 2];
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::size_t> members(pool.begin(), pool.begin() + size_dist(rng));
    edges.push_back(members);
  }
  for (std::size_t e = 0; e < cross; ++e) {
    std::vector<std::size_t> members;
    for (auto& pool : side) {
      std::shuffle(pool.begin(), pool.end(), rng);
      members.insert(members.end(), pool.begin(), pool.begin() + 2);
    }
    edges.push_back(members);
  }
  for (const auto& e : edges)
    for (std::size_t v : e) covered[v] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (!covered[i]) edges[labels[i]].push_back(i);  // first intra edge of its side
  std::normal_distribution<double> noise(0.0, 1.0);
  DenseMatrix x(n, 4);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      x(i, j) = std::max(0.0, 2.0 + noise(rng) + (j == labels[i] ? 0.5 : 0.0));
  return {hyperdiff::build_hypergraph(edges, {}, {.num_nodes = n}), labels, x};
}

inline double relative_error(const DenseMatrix& got, const DenseMatrix& want) {
  return hyperdiff::frobenius_distance(got, want) / hyperdiff::frobenius_norm(want);
}

}  // namespace testing_support
