#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hyperdiff/hypergraph.hpp"
#include "hyperdiff/matrix.hpp"
#include "hyperdiff/operators.hpp"

namespace hyperdiff {

struct DiffusionConfig {
  double alpha = 0.5;
  MixingFamily mix = MixingFamily::power_mean(1.0);
  double tol = 1e-6;
  std::size_t max_iters = 500;

  // lambda = alpha / (1 - alpha), the weight of the regularizer in the
  // constrained loss the fixed point is associated with.
  double lambda() const { return alpha / (1.0 - alpha); }
  // Throws ConfigError.
  void validate() const;
};

struct DiffusionResult {
  EmbeddingMatrix f_star;
  std::size_t iters = 0;
  bool converged = false;
  // One entry per iteration.
  std::vector<double> residual_history;
  std::vector<double> phi_history;  // phi of the unnormalized iterate G
  std::vector<double> elapsed_ms;   // cumulative wall time
};

/// Normalized nonlinear fixed-point iteration:
///   U <- u / phi(u);  F <- f0 (default U)
///   repeat G = alpha L(F) + (1 - alpha) U;  F <- G / phi(G)
/// until ||F_new - F|| / ||F_new|| < tol or max_iters.
///
/// Requires u > 0 entrywise (DomainError otherwise). A run that hits
/// max_iters returns with converged = false and the last iterate.
DiffusionResult hypernd_fixed_point(const Hypergraph& h, const DegreeData& deg,
                                    const EmbeddingMatrix& u, const DiffusionConfig& cfg,
                                    const std::optional<EmbeddingMatrix>& f0 = std::nullopt);

// One normalized step; returns phi(G). `u_normalized` must already satisfy
// phi = 1. `scratch` is an m x k buffer.
double hypernd_step(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                    double alpha, const EmbeddingMatrix& u_normalized, const EmbeddingMatrix& f,
                    EmbeddingMatrix& next, DenseMatrix& scratch);

/// Linear hypergraph label spreading F <- alpha A_H F + (1 - alpha) y with
/// A_H = D^{-1/2} K W K^T D^{-1/2} - I. Starts from y and stops once the
/// absolute Frobenius change of an update drops below tol. Converges only when
/// alpha times the spectral radius of A_H is below one; otherwise the run
/// ends unconverged (or with NonFiniteResult on overflow).
DiffusionResult linear_hls(const Hypergraph& h, const DegreeData& deg, const EmbeddingMatrix& y,
                           double alpha, double tol = 1e-6, std::size_t max_iters = 500);

// Residual sequence of x_{k+1} = step(x_k), relative change in the 2-norm,
// for checking whether an iteration settles.
struct IterationTrace {
  std::vector<std::vector<double>> states;  // x_1 .. x_steps
  std::vector<double> residuals;
  // First step that produced a non-finite state; the trace stops there.
  std::optional<std::size_t> diverged_at;
};

IterationTrace trace_iteration(const std::function<std::vector<double>(const std::vector<double>&)>& step,
                               std::vector<double> x0, std::size_t steps);

struct OscillationReport {
  double min_residual = 0.0;
  double max_residual_tail = 0.0;  // max over the last `tail` residuals
  bool settled = false;            // some residual fell below the threshold
};

OscillationReport detect_oscillation(const std::vector<double>& residuals, double threshold = 1e-3,
                                     std::size_t tail = 100);

/// Three-dimensional counterexample with A the cyclic shift and
/// y = (0.1, 0.2, 0.3):
///   raw:        z_{k+1} = A (A z_k)^{1.5} + y
///   normalized: x_{k+1} = x~ / ||x~||_inf,  x~ = A (A x_k)^{1.5} + y
/// Both start from the same seeded uniform [0,1]^3 point.
struct NonconvergenceDemo {
  std::array<double, 3> start{};
  IterationTrace normalized;
  IterationTrace raw;
  OscillationReport normalized_report;
  OscillationReport raw_report;
};

NonconvergenceDemo nonconvergence_demo(std::size_t steps, std::uint64_t seed);

}  // namespace hyperdiff
