#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyperdiff/matrix.hpp"

namespace hyperdiff {

struct BuildOptions {
  // Node count; inferred as max id + 1 when absent.
  std::optional<std::size_t> num_nodes;
  // Permit one-member hyperedges. Only datasets repaired with
  // `preprocess add-self-loops` set this.
  bool allow_singletons = false;
};

/// Weighted hypergraph stored as a 0/1 incidence matrix K in two compressed
/// layouts: hyperedge-major (members of each hyperedge, i.e. columns of K)
/// and node-major (hyperedges containing each node, i.e. rows of K).
///
/// Immutable after construction. Members inside a hyperedge are sorted and
/// unique; node-major lists are sorted by hyperedge id.
class Hypergraph {
 public:
  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return weights_.size(); }
  std::size_t nnz() const noexcept { return edge_members_.size(); }

  std::span<const std::size_t> members(std::size_t e) const {
    return {edge_members_.data() + edge_offsets_[e], edge_offsets_[e + 1] - edge_offsets_[e]};
  }
  std::span<const std::size_t> incident_edges(std::size_t i) const {
    return {node_edges_.data() + node_offsets_[i], node_offsets_[i + 1] - node_offsets_[i]};
  }
  std::size_t edge_size(std::size_t e) const { return edge_offsets_[e + 1] - edge_offsets_[e]; }
  double weight(std::size_t e) const { return weights_[e]; }
  std::span<const double> weights() const noexcept { return weights_; }

  // Number of repeated node ids dropped while building.
  std::size_t duplicates_removed() const noexcept { return duplicates_removed_; }

  // Stable 64-bit content hash of n, incidence and weights.
  std::uint64_t content_hash() const;

  bool operator==(const Hypergraph& other) const;

  friend Hypergraph build_hypergraph(const std::vector<std::vector<std::size_t>>&,
                                     const std::vector<double>&, const BuildOptions&);

 private:
  Hypergraph() = default;

  std::size_t num_nodes_ = 0;
  std::vector<std::size_t> edge_offsets_;
  std::vector<std::size_t> edge_members_;
  std::vector<std::size_t> node_offsets_;
  std::vector<std::size_t> node_edges_;
  std::vector<double> weights_;
  std::size_t duplicates_removed_ = 0;
};

// Throws Error{EmptyHyperedge | NonpositiveWeight | IsolatedNode |
// DimensionMismatch}. Empty `weights` means unit weights.
Hypergraph build_hypergraph(const std::vector<std::vector<std::size_t>>& edge_lists,
                            const std::vector<double>& weights = {},
                            const BuildOptions& options = {});

struct DegreeData {
  std::vector<double> node_degrees;     // delta_i = sum_{e contains i} w(e)
  std::vector<std::size_t> edge_sizes;  // |e|
  std::vector<double> inv_sqrt_degrees; // delta_i^{-1/2}
};

DegreeData degree_data(const Hypergraph& h);

/// D^{-1/2} K W K^T D^{-1/2} as a dense n x n matrix (= normalized clique
/// expansion adjacency plus identity). O(n^2) memory; meant for small
/// instances and reference checks.
DenseMatrix clique_expansion_normalized(const Hypergraph& h, const DegreeData& deg);

/// out = D^{-1/2} K W K^T D^{-1/2} f, computed with one hyperedge-major and
/// one node-major pass.
DenseMatrix apply_clique_expansion(const Hypergraph& h, const DegreeData& deg,
                                   const DenseMatrix& f);

}  // namespace hyperdiff
