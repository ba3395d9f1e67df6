#include "hyperdiff/diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "hyperdiff/error.hpp"

namespace hyperdiff {

void DiffusionConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream s;
    s << "alpha = " << alpha << " must lie in (0, 1)";
    throw Error(ErrorKind::ConfigError, s.str());
  }
  if (!(tol > 0.0)) throw Error(ErrorKind::ConfigError, "tol must be positive");
  if (max_iters < 1) throw Error(ErrorKind::ConfigError, "max_iters must be at least 1");
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double relative_change(const DenseMatrix& next, const DenseMatrix& prev) {
  const double diff = frobenius_distance(next, prev);
  const double norm = frobenius_norm(next);
  return norm > 0.0 ? diff / norm : diff;
}

// G = alpha L + (1 - alpha) U, written into `g`.
void blend(double alpha, const DenseMatrix& l, const DenseMatrix& u, DenseMatrix& g) {
  if (g.rows() != u.rows() || g.cols() != u.cols()) g = DenseMatrix(u.rows(), u.cols());
  auto gv = g.values();
  auto lv = l.values();
  auto uv = u.values();
  const double beta = 1.0 - alpha;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = alpha * lv[i] + beta * uv[i];
}

}  // namespace

double hypernd_step(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                    double alpha, const EmbeddingMatrix& u_normalized, const EmbeddingMatrix& f,
                    EmbeddingMatrix& next, DenseMatrix& scratch) {
  hyperedge_mu_into(h, deg, mix, f, scratch);
  DenseMatrix l;
  scatter_edges_to_nodes(h, deg, scratch, l);
  blend(alpha, l, u_normalized, next);
  hyperedge_mu_into(h, deg, mix, next, scratch);
  const double phi = normalizer_from_mu(h, scratch);
  scale_in_place(next, 1.0 / phi);
  if (!all_finite(next)) throw Error(ErrorKind::NonFiniteResult, "iterate overflowed");
  return phi;
}

DiffusionResult hypernd_fixed_point(const Hypergraph& h, const DegreeData& deg,
                                    const EmbeddingMatrix& u, const DiffusionConfig& cfg,
                                    const std::optional<EmbeddingMatrix>& f0) {
  cfg.validate();
  if (u.rows() != h.num_nodes()) {
    throw Error(ErrorKind::ShapeMismatch, "input has " + std::to_string(u.rows()) +
                                              " rows, hypergraph has " +
                                              std::to_string(h.num_nodes()) + " nodes");
  }
  if (!all_positive(u) || !all_finite(u)) {
    throw Error(ErrorKind::DomainError, "diffusion input must be finite and strictly positive");
  }

  const auto start = Clock::now();
  EmbeddingMatrix u_hat = scaled(u, 1.0 / normalizer_phi(h, deg, cfg.mix, u));
  u_hat.set_blocks(u.label_cols(), u.feature_cols());

  EmbeddingMatrix f;
  if (f0) {
    if (f0->rows() != u.rows() || f0->cols() != u.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "starting point shape differs from input");
    }
    if (!all_nonnegative(*f0) || !all_finite(*f0) || frobenius_norm(*f0) == 0.0) {
      throw Error(ErrorKind::DomainError, "starting point must be nonnegative and nonzero");
    }
    f = *f0;
  } else {
    f = u_hat;
  }

  DiffusionResult result;
  DenseMatrix mu;   // aggregates of the current iterate
  DenseMatrix l;    // L(F)
  EmbeddingMatrix g;
  hyperedge_mu_into(h, deg, cfg.mix, f, mu);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    scatter_edges_to_nodes(h, deg, mu, l);
    blend(cfg.alpha, l, u_hat, g);
    hyperedge_mu_into(h, deg, cfg.mix, g, mu);
    const double phi = normalizer_from_mu(h, mu);
    const double inv_phi = 1.0 / phi;
    scale_in_place(g, inv_phi);
    // mu is one-homogeneous, so the aggregates of G / phi(G) are mu(G) / phi(G).
    scale_in_place(mu, inv_phi);
    if (!all_finite(g)) throw Error(ErrorKind::NonFiniteResult, "iterate overflowed");

    const double res = relative_change(g, f);
    std::swap(f, g);
    result.residual_history.push_back(res);
    result.phi_history.push_back(phi);
    result.elapsed_ms.push_back(ms_since(start));
    result.iters = it;
    if (res < cfg.tol) {
      result.converged = true;
      break;
    }
  }
  f.set_blocks(u.label_cols(), u.feature_cols());
  result.f_star = std::move(f);
  return result;
}

DiffusionResult linear_hls(const Hypergraph& h, const DegreeData& deg, const EmbeddingMatrix& y,
                           double alpha, double tol, std::size_t max_iters) {
  DiffusionConfig cfg;
  cfg.alpha = alpha;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  cfg.validate();
  if (y.rows() != h.num_nodes()) {
    throw Error(ErrorKind::ShapeMismatch, "label matrix row count differs from n");
  }
  if (!all_nonnegative(y)) throw Error(ErrorKind::DomainError, "label input must be nonnegative");

  const auto start = Clock::now();
  DiffusionResult result;
  EmbeddingMatrix f = y;
  EmbeddingMatrix next(y.rows(), y.cols());
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const DenseMatrix af = apply_clique_expansion(h, deg, f);
    auto nv = next.values();
    auto av = af.values();
    auto fv = f.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < nv.size(); ++i)
      nv[i] = alpha * (av[i] - fv[i]) + (1.0 - alpha) * yv[i];
    if (!all_finite(next)) break;  // diverged; keep the last finite iterate

    // Absolute change: the linear map is a contraction with factor
    // alpha * rho(A_H), so the fixed-point residual of the returned iterate is
    // below tol as well, independent of the scale of y.
    const double res = frobenius_distance(next, f);
    std::swap(f, next);
    result.residual_history.push_back(res);
    result.elapsed_ms.push_back(ms_since(start));
    result.iters = it;
    if (res < tol) {
      result.converged = true;
      break;
    }
  }
  f.set_blocks(y.label_cols(), y.feature_cols());
  result.f_star = std::move(f);
  return result;
}

IterationTrace trace_iteration(
    const std::function<std::vector<double>(const std::vector<double>&)>& step,
    std::vector<double> x0, std::size_t steps) {
  IterationTrace trace;
  std::vector<double> x = std::move(x0);
  for (std::size_t k = 1; k <= steps; ++k) {
    std::vector<double> next = step(x);
    bool finite = true;
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (!std::isfinite(next[i])) finite = false;
      diff += (next[i] - x[i]) * (next[i] - x[i]);
      norm += next[i] * next[i];
    }
    if (!finite || !std::isfinite(norm) || !std::isfinite(diff)) {
      trace.diverged_at = k;
      break;
    }
    trace.residuals.push_back(norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff));
    trace.states.push_back(next);
    x = std::move(next);
  }
  return trace;
}

OscillationReport detect_oscillation(const std::vector<double>& residuals, double threshold,
                                     std::size_t tail) {
  OscillationReport r;
  if (residuals.empty()) return r;
  r.min_residual = *std::min_element(residuals.begin(), residuals.end());
  const std::size_t from = residuals.size() > tail ? residuals.size() - tail : 0;
  r.max_residual_tail = *std::max_element(residuals.begin() + static_cast<std::ptrdiff_t>(from),
                                          residuals.end());
  r.settled = r.min_residual < threshold;
  return r;
}

namespace {

// A (A x)^{1.5} + y with A the cyclic shift (A x)_i = x_{i+1}.
std::vector<double> cyclic_power_map(const std::vector<double>& x) {
  static constexpr double y[3] = {0.1, 0.2, 0.3};
  std::vector<double> out(3);
  for (std::size_t i = 0; i < 3; ++i) out[i] = std::pow(x[(i + 2) % 3], 1.5) + y[i];
  return out;
}

}  // namespace

NonconvergenceDemo nonconvergence_demo(std::size_t steps, std::uint64_t seed) {
  if (steps < 1) throw Error(ErrorKind::ConfigError, "steps must be at least 1");
  NonconvergenceDemo demo;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : demo.start) v = unit(rng);
  const std::vector<double> x0(demo.start.begin(), demo.start.end());

  demo.raw = trace_iteration(cyclic_power_map, x0, steps);
  demo.normalized = trace_iteration(
      [](const std::vector<double>& x) {
        std::vector<double> t = cyclic_power_map(x);
        double inf_norm = 0.0;
        for (double v : t) inf_norm = std::max(inf_norm, std::abs(v));
        for (double& v : t) v /= inf_norm;
        return t;
      },
      x0, steps);
  demo.raw_report = detect_oscillation(demo.raw.residuals);
  demo.normalized_report = detect_oscillation(demo.normalized.residuals);
  return demo;
}

}  // namespace hyperdiff
