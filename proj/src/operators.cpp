#include "hyperdiff/operators.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "hyperdiff/error.hpp"

namespace hyperdiff {

MixingFamily MixingFamily::power_mean(double p) {
  if (p == 0.0 || !std::isfinite(p)) {
    std::ostringstream msg;
    msg << "power mean exponent " << p << " is not supported (need nonzero finite p)";
    throw Error(ErrorKind::ConfigError, msg.str());
  }
  return MixingFamily(Kind::PowerMean, p);
}

MixingFamily MixingFamily::identity() { return MixingFamily(Kind::Identity, 1.0); }

bool MixingFamily::integer_power() const noexcept {
  return kind_ == Kind::PowerMean && std::abs(p_) <= 64.0 && p_ == std::round(p_);
}

std::string MixingFamily::describe() const {
  if (kind_ == Kind::Identity) return "identity";
  std::ostringstream s;
  s << "power_mean(p=" << p_ << ")";
  return s.str();
}

namespace {

double int_pow(double x, int e) {
  const bool invert = e < 0;
  unsigned u = static_cast<unsigned>(invert ? -e : e);
  double result = 1.0;
  while (u) {
    if (u & 1U) result *= x;
    x *= x;
    u >>= 1U;
  }
  return invert ? 1.0 / result : result;
}

// Real p-th root; odd integer p keeps the sign of a negative mean.
double power_root(double mean, double p, bool integer, int ip) {
  if (ip == 2) return std::sqrt(mean);
  if (ip == 3) return std::cbrt(mean);
  if (mean < 0.0 && integer && (ip % 2 != 0)) return -std::pow(-mean, 1.0 / p);
  return std::pow(mean, 1.0 / p);
}

void check_shape(const Hypergraph& h, const DenseMatrix& f) {
  if (f.rows() != h.num_nodes()) {
    throw Error(ErrorKind::ShapeMismatch, "embedding has " + std::to_string(f.rows()) +
                                              " rows, hypergraph has " +
                                              std::to_string(h.num_nodes()) + " nodes");
  }
}

}  // namespace

void hyperedge_mu_into(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                       const DenseMatrix& f, DenseMatrix& out) {
  check_shape(h, f);
  const std::size_t k = f.cols();
  const std::size_t m = h.num_edges();
  if (out.rows() != m || out.cols() != k) out = DenseMatrix(m, k);

  const bool identity = mix.kind() == MixingFamily::Kind::Identity;
  const double p = mix.p();
  const bool integer = mix.integer_power();
  const int ip = integer ? static_cast<int>(p) : 0;
  const auto& isd = deg.inv_sqrt_degrees;
  std::atomic<bool> domain_error{false};

#pragma omp parallel
  {
    std::vector<double> scale(k), inv_scale(k);
#pragma omp for schedule(dynamic, 64)
    for (std::size_t e = 0; e < m; ++e) {
      const auto members = h.members(e);
      auto mu = out.row(e);
      std::fill(mu.begin(), mu.end(), 0.0);

      if (identity || p == 1.0) {
        for (std::size_t i : members) {
          const double s = isd[i];
          const auto fi = f.row(i);
          for (std::size_t j = 0; j < k; ++j) mu[j] += s * fi[j];
        }
        if (!identity) {
          const double inv = 1.0 / static_cast<double>(members.size());
          for (double& v : mu) v *= inv;
        }
        continue;
      }

      // Extreme magnitude per column: max for p > 0, min for p < 0, so that
      // every powered ratio is at most one.
      bool bad = false;
      if (p > 0.0) {
        std::fill(scale.begin(), scale.end(), 0.0);
        for (std::size_t i : members) {
          const auto fi = f.row(i);
          for (std::size_t j = 0; j < k; ++j) {
            const double z = isd[i] * fi[j];
            if (z < 0.0 && !integer) bad = true;
            scale[j] = std::max(scale[j], std::abs(z));
          }
        }
      } else {
        std::fill(scale.begin(), scale.end(), std::numeric_limits<double>::infinity());
        for (std::size_t i : members) {
          const auto fi = f.row(i);
          for (std::size_t j = 0; j < k; ++j) {
            const double z = isd[i] * fi[j];
            if (!(z > 0.0)) bad = true;
            scale[j] = std::min(scale[j], z);
          }
        }
      }
      if (bad) {
        domain_error.store(true, std::memory_order_relaxed);
        continue;
      }
      for (std::size_t j = 0; j < k; ++j) inv_scale[j] = scale[j] > 0.0 ? 1.0 / scale[j] : 0.0;

      for (std::size_t i : members) {
        const double s = isd[i];
        const auto fi = f.row(i);
        if (integer) {
          for (std::size_t j = 0; j < k; ++j) mu[j] += int_pow(s * fi[j] * inv_scale[j], ip);
        } else {
          for (std::size_t j = 0; j < k; ++j) mu[j] += std::pow(s * fi[j] * inv_scale[j], p);
        }
      }
      const double inv_size = 1.0 / static_cast<double>(members.size());
      for (std::size_t j = 0; j < k; ++j) {
        mu[j] = scale[j] > 0.0 ? scale[j] * power_root(mu[j] * inv_size, p, integer, ip) : 0.0;
      }
    }
  }

  if (domain_error.load()) {
    throw Error(ErrorKind::DomainError,
                "power mean with p = " + std::to_string(p) +
                    " needs strictly positive (p < 0) or nonnegative (fractional p) entries");
  }
}

DenseMatrix hyperedge_mu(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                         const DenseMatrix& f) {
  DenseMatrix out;
  hyperedge_mu_into(h, deg, mix, f, out);
  return out;
}

void scatter_edges_to_nodes(const Hypergraph& h, const DegreeData& deg, const DenseMatrix& mu,
                            DenseMatrix& out) {
  const std::size_t k = mu.cols();
  if (out.rows() != h.num_nodes() || out.cols() != k) out = DenseMatrix(h.num_nodes(), k);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < h.num_nodes(); ++i) {
    auto row = out.row(i);
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t e : h.incident_edges(i)) {
      const double w = h.weight(e);
      const auto me = mu.row(e);
      for (std::size_t j = 0; j < k; ++j) row[j] += w * me[j];
    }
    const double s = deg.inv_sqrt_degrees[i];
    for (double& v : row) v *= s;
  }
}

DenseMatrix diffusion_map(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                          const DenseMatrix& f) {
  DenseMatrix mu;
  hyperedge_mu_into(h, deg, mix, f, mu);
  DenseMatrix out;
  scatter_edges_to_nodes(h, deg, mu, out);
  if (!all_finite(out)) throw Error(ErrorKind::NonFiniteResult, "diffusion map overflowed");
  return out;
}

double regularizer_omega(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                         const DenseMatrix& f, MuScaling scaling) {
  const DenseMatrix mu = hyperedge_mu(h, deg, mix, f);
  const double c = scaling == MuScaling::Half ? 0.5 : 1.0;
  const std::size_t k = f.cols();
  std::vector<double> per_edge(h.num_edges(), 0.0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    const auto me = mu.row(e);
    double s = 0.0;
    for (std::size_t i : h.members(e)) {
      const double sc = deg.inv_sqrt_degrees[i];
      const auto fi = f.row(i);
      for (std::size_t j = 0; j < k; ++j) {
        const double d = sc * fi[j] - c * me[j];
        s += d * d;
      }
    }
    per_edge[e] = h.weight(e) * s;
  }
  return pairwise_sum(per_edge);
}

double normalizer_from_mu(const Hypergraph& h, const DenseMatrix& mu) {
  std::vector<double> per_edge(h.num_edges(), 0.0);
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    double s = 0.0;
    for (double v : mu.row(e)) s += v * v;
    per_edge[e] = h.weight(e) * s;
  }
  const double total = pairwise_sum(per_edge);
  if (!(total > 0.0)) {
    throw Error(ErrorKind::ZeroNormalizer, "normalizer vanished (zero or degenerate input)");
  }
  if (!std::isfinite(total)) throw Error(ErrorKind::NonFiniteResult, "normalizer overflowed");
  return 2.0 * std::sqrt(total);
}

double normalizer_phi(const Hypergraph& h, const DegreeData& deg, const MixingFamily& mix,
                      const DenseMatrix& f) {
  return normalizer_from_mu(h, hyperedge_mu(h, deg, mix, f));
}

}  // namespace hyperdiff
