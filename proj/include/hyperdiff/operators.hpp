#pragma once

#include <string>

#include "hyperdiff/hypergraph.hpp"
#include "hyperdiff/matrix.hpp"

namespace hyperdiff {

/// The (sigma, rho) pair that turns member rows into a hyperedge aggregate.
///
/// PowerMean(p): rho(z) = z^p entrywise and sigma(s) = (s / |e|)^{1/p}, so the
/// aggregate is the p-power mean. Degrees are (1/p, p).
/// Identity: sigma = rho = id, so the aggregate is the plain member sum.
/// Degrees are (1, 1).
class MixingFamily {
 public:
  enum class Kind { PowerMean, Identity };

  // Throws ConfigError for p == 0 or non-finite p.
  static MixingFamily power_mean(double p);
  static MixingFamily identity();

  Kind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }
  double degree_sigma() const noexcept { return kind_ == Kind::Identity ? 1.0 : 1.0 / p_; }
  double degree_rho() const noexcept { return kind_ == Kind::Identity ? 1.0 : p_; }
  bool integer_power() const noexcept;

  std::string describe() const;

 private:
  MixingFamily(Kind kind, double p) : kind_(kind), p_(p) {}
  Kind kind_;
  double p_;
};

/// Row e holds mu_e = sigma(K^T rho(D^{-1/2} f))_e, the aggregate of the
/// degree-normalized member rows f_j / sqrt(delta_j). Power means are
/// evaluated as M * mean_p(z / M) with M the per-hyperedge-column extreme
/// magnitude, which keeps p = 10 finite on large inputs.
///
/// Throws DomainError when a negative entry meets a non-integer p, or a
/// nonpositive entry meets a negative p.
DenseMatrix hyperedge_mu(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                         const DenseMatrix& f);

/// L(f) = D^{-1/2} K W sigma(K^T rho(D^{-1/2} f)). Never forms a dense n x n
/// or n x m product. Throws NonFiniteResult on overflow.
DenseMatrix diffusion_map(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                          const DenseMatrix& f);

// Node-major half of diffusion_map: D^{-1/2} K W mu.
void scatter_edges_to_nodes(const Hypergraph& h, const DegreeData& deg, const DenseMatrix& mu,
                            DenseMatrix& out);
// Hyperedge-major half: writes mu into `out` (resized as needed).
void hyperedge_mu_into(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                       const DenseMatrix& f, DenseMatrix& out);

enum class MuScaling {
  Unit,  // sum_e sum_{i in e} w(e) ||f_i/sqrt(delta_i) - mu_e||^2
  Half,  // same with mu_e replaced by mu_e / 2
};

/// Hyperedge variance regularizer Omega_mu. Returns a nonnegative value.
double regularizer_omega(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                         const DenseMatrix& f, MuScaling scaling = MuScaling::Unit);

/// phi(f) = 2 sqrt(sum_e w(e) ||mu_e||^2). One-homogeneous.
/// Throws ZeroNormalizer when the sum vanishes.
double normalizer_phi(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                      const DenseMatrix& f);

// phi computed from precomputed hyperedge aggregates.
double normalizer_from_mu(const Hypergraph& h, const DenseMatrix& mu);

}  // namespace hyperdiff
