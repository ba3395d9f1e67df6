#include "hyperdiff/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "hyperdiff/error.hpp"
#include "hash.hpp"

namespace hyperdiff {

using detail::Fnv1a;

Hypergraph build_hypergraph(const std::vector<std::vector<std::size_t>>& edge_lists,
                            const std::vector<double>& weights, const BuildOptions& options) {
  if (!weights.empty() && weights.size() != edge_lists.size()) {
    throw Error(ErrorKind::DimensionMismatch, "got " + std::to_string(weights.size()) +
                                                  " weights for " +
                                                  std::to_string(edge_lists.size()) + " hyperedges");
  }

  std::size_t max_id = 0;
  bool any = false;
  for (const auto& e : edge_lists)
    for (std::size_t v : e) {
      max_id = std::max(max_id, v);
      any = true;
    }
  const std::size_t n = options.num_nodes.value_or(any ? max_id + 1 : 0);
  if (any && max_id >= n) {
    throw Error(ErrorKind::DimensionMismatch,
                "node id " + std::to_string(max_id) + " out of range for n = " + std::to_string(n),
                std::nullopt, max_id);
  }

  const std::size_t min_size = options.allow_singletons ? 1 : 2;
  Hypergraph h;
  h.num_nodes_ = n;
  h.edge_offsets_.reserve(edge_lists.size() + 1);
  h.edge_offsets_.push_back(0);
  h.weights_.reserve(edge_lists.size());

  std::vector<std::size_t> scratch;
  for (std::size_t e = 0; e < edge_lists.size(); ++e) {
    scratch.assign(edge_lists[e].begin(), edge_lists[e].end());
    std::sort(scratch.begin(), scratch.end());
    const auto last = std::unique(scratch.begin(), scratch.end());
    h.duplicates_removed_ += static_cast<std::size_t>(scratch.end() - last);
    scratch.erase(last, scratch.end());
    if (scratch.size() < min_size) {
      throw Error(ErrorKind::EmptyHyperedge,
                  "hyperedge " + std::to_string(e) + " has " + std::to_string(scratch.size()) +
                      " distinct members",
                  std::nullopt, e);
    }
    const double w = weights.empty() ? 1.0 : weights[e];
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorKind::NonpositiveWeight,
                  "hyperedge " + std::to_string(e) + " has weight " + std::to_string(w),
                  std::nullopt, e);
    }
    h.edge_members_.insert(h.edge_members_.end(), scratch.begin(), scratch.end());
    h.edge_offsets_.push_back(h.edge_members_.size());
    h.weights_.push_back(w);
  }

  // Node-major layout by counting sort; hyperedge ids come out ascending.
  h.node_offsets_.assign(n + 1, 0);
  for (std::size_t v : h.edge_members_) ++h.node_offsets_[v + 1];
  for (std::size_t i = 0; i < n; ++i) h.node_offsets_[i + 1] += h.node_offsets_[i];
  h.node_edges_.resize(h.edge_members_.size());
  std::vector<std::size_t> cursor(h.node_offsets_.begin(), h.node_offsets_.end() - 1);
  for (std::size_t e = 0; e < h.weights_.size(); ++e)
    for (std::size_t k = h.edge_offsets_[e]; k < h.edge_offsets_[e + 1]; ++k)
      h.node_edges_[cursor[h.edge_members_[k]]++] = e;

  for (std::size_t i = 0; i < n; ++i) {
    if (h.node_offsets_[i] == h.node_offsets_[i + 1]) {
      throw Error(ErrorKind::IsolatedNode, "node " + std::to_string(i) + " is in no hyperedge",
                  std::nullopt, i);
    }
  }
  return h;
}

std::uint64_t Hypergraph::content_hash() const {
  Fnv1a hash;
  hash.u64(num_nodes_);
  hash.u64(weights_.size());
  for (std::size_t o : edge_offsets_) hash.u64(o);
  for (std::size_t v : edge_members_) hash.u64(v);
  for (double w : weights_) hash.f64(w);
  return hash.value();
}

bool Hypergraph::operator==(const Hypergraph& other) const {
  if (num_nodes_ != other.num_nodes_ || edge_offsets_ != other.edge_offsets_ ||
      edge_members_ != other.edge_members_ || weights_.size() != other.weights_.size()) {
    return false;
  }
  return std::memcmp(weights_.data(), other.weights_.data(), weights_.size() * sizeof(double)) == 0;
}

DegreeData degree_data(const Hypergraph& h) {
  DegreeData d;
  const std::size_t n = h.num_nodes();
  d.node_degrees.assign(n, 0.0);
  d.inv_sqrt_degrees.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t e : h.incident_edges(i)) s += h.weight(e);
    d.node_degrees[i] = s;
    d.inv_sqrt_degrees[i] = 1.0 / std::sqrt(s);
  }
  d.edge_sizes.resize(h.num_edges());
  for (std::size_t e = 0; e < h.num_edges(); ++e) d.edge_sizes[e] = h.edge_size(e);
  return d;
}

DenseMatrix clique_expansion_normalized(const Hypergraph& h, const DegreeData& deg) {
  const std::size_t n = h.num_nodes();
  DenseMatrix out(n, n);
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    const auto members = h.members(e);
    const double w = h.weight(e);
    for (std::size_t a : members)
      for (std::size_t b : members) out(a, b) += w;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= deg.inv_sqrt_degrees[i] * deg.inv_sqrt_degrees[j];
  return out;
}

DenseMatrix apply_clique_expansion(const Hypergraph& h, const DegreeData& deg,
                                   const DenseMatrix& f) {
  if (f.rows() != h.num_nodes()) {
    throw Error(ErrorKind::ShapeMismatch, "apply_clique_expansion: row count differs from n");
  }
  const std::size_t k = f.cols();
  DenseMatrix edge_sums(h.num_edges(), k);
#pragma omp parallel for schedule(static)
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    auto out = edge_sums.row(e);
    for (std::size_t i : h.members(e)) {
      const double s = deg.inv_sqrt_degrees[i];
      const auto fi = f.row(i);
      for (std::size_t j = 0; j < k; ++j) out[j] += s * fi[j];
    }
  }
  DenseMatrix out(h.num_nodes(), k);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < h.num_nodes(); ++i) {
    auto row = out.row(i);
    for (std::size_t e : h.incident_edges(i)) {
      const double w = h.weight(e);
      const auto se = edge_sums.row(e);
      for (std::size_t j = 0; j < k; ++j) row[j] += w * se[j];
    }
    const double s = deg.inv_sqrt_degrees[i];
    for (double& v : row) v *= s;
  }
  return out;
}

}  // namespace hyperdiff
