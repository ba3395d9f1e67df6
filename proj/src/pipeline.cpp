#include "hyperdiff/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hash.hpp"
#include "hyperdiff/error.hpp"
#include "hyperdiff/io.hpp"

namespace hyperdiff {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t matrix_hash(const DenseMatrix& a) {
  detail::Fnv1a h;
  h.u64(a.rows());
  h.u64(a.cols());
  h.u64(a.label_cols());
  h.u64(a.feature_cols());
  for (double v : a.values()) h.f64(v);
  return h.value();
}

std::vector<std::vector<std::size_t>> group_by_class(std::span<const std::size_t> ids,
                                                     std::span<const std::size_t> labels) {
  std::size_t classes = 0;
  for (std::size_t id : ids) classes = std::max(classes, labels[id] + 1);
  std::vector<std::vector<std::size_t>> groups(classes);
  for (std::size_t id : ids) groups[labels[id]].push_back(id);
  return groups;
}

}  // namespace

DenseMatrix label_matrix(std::span<const std::size_t> labels, std::span<const std::size_t> labeled,
                         std::size_t num_nodes, std::size_t classes) {
  DenseMatrix y(num_nodes, classes);
  for (std::size_t id : labeled) {
    if (id >= num_nodes || id >= labels.size()) {
      throw Error(ErrorKind::ShapeMismatch, "labeled node out of range", std::nullopt, id);
    }
    if (labels[id] >= classes) {
      throw Error(ErrorKind::ClassOutOfRange, "class id out of range", std::nullopt, id);
    }
    y(id, labels[id]) = 1.0;
  }
  y.set_blocks(classes, 0);
  return y;
}

EmbeddingMatrix assemble_input(const DenseMatrix& y, const DenseMatrix* x, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    std::ostringstream s;
    s << "smoothing epsilon " << epsilon << " outside (0, 1)";
    throw Error(ErrorKind::EpsilonOutOfRange, s.str());
  }
  const std::size_t c = y.cols();
  const std::size_t d = x ? x->cols() : 0;
  if (x && x->rows() != y.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "label and feature row counts differ");
  }
  EmbeddingMatrix u(y.rows(), c + d);
  const double keep = 1.0 - epsilon;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto row = u.row(i);
    for (std::size_t j = 0; j < c; ++j) row[j] = keep * y(i, j) + epsilon;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = (*x)(i, j);
      if (v < 0.0 || !std::isfinite(v)) {
        throw Error(ErrorKind::NegativeFeature,
                    "feature (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") is negative or non-finite; shift features first",
                    std::nullopt, i);
      }
      row[c + j] = keep * v + epsilon;
    }
  }
  u.set_blocks(c, d);
  return u;
}

// ---------------------------------------------------------------- cache

std::string DiffusionCache::Key::file_stem() const {
  detail::Fnv1a h;
  h.u64(graph_hash);
  h.u64(input_hash);
  h.f64(alpha);
  h.u64(static_cast<std::uint64_t>(mix_kind));
  h.f64(p);
  h.f64(tol);
  h.u64(max_iters);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

DiffusionCache::DiffusionCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(*directory_);
}

DiffusionCache::Key DiffusionCache::make_key(const Hypergraph& h, const EmbeddingMatrix& u,
                                             const DiffusionConfig& cfg) {
  Key k;
  k.graph_hash = h.content_hash();
  k.input_hash = matrix_hash(u);
  k.alpha = cfg.alpha;
  k.mix_kind = static_cast<int>(cfg.mix.kind());
  k.p = cfg.mix.p();
  k.tol = cfg.tol;
  k.max_iters = cfg.max_iters;
  return k;
}

std::optional<DiffusionResult> DiffusionCache::lookup(const Key& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++hits_;
      return it->second;
    }
  }
  if (directory_) {
    const auto emb = *directory_ / (key.file_stem() + ".emb");
    const auto meta = *directory_ / (key.file_stem() + ".json");
    if (std::filesystem::exists(emb) && std::filesystem::exists(meta)) {
      DiffusionResult r;
      r.f_star = load_embedding(emb);
      std::ifstream in(meta);
      const auto j = nlohmann::json::parse(in);
      r.iters = j.at("iters").get<std::size_t>();
      r.converged = j.at("converged").get<bool>();
      r.residual_history = j.at("residuals").get<std::vector<double>>();
      r.phi_history = j.at("phi").get<std::vector<double>>();
      std::lock_guard lock(mutex_);
      ++hits_;
      entries_.emplace(key, r);
      return r;
    }
  }
  return std::nullopt;
}

void DiffusionCache::store(const Key& key, const DiffusionResult& result) {
  {
    std::lock_guard lock(mutex_);
    entries_.insert_or_assign(key, result);
  }
  if (directory_) {
    save_embedding(result.f_star, *directory_ / (key.file_stem() + ".emb"));
    nlohmann::json j;
    j["iters"] = result.iters;
    j["converged"] = result.converged;
    j["residuals"] = result.residual_history;
    j["phi"] = result.phi_history;
    j["alpha"] = key.alpha;
    j["p"] = key.p;
    j["tol"] = key.tol;
    std::ofstream out(*directory_ / (key.file_stem() + ".json"));
    out << j.dump() << '\n';
  }
}

DiffusionResult DiffusionCache::get_or_compute(const Hypergraph& h, const DegreeData& deg,
                                               const EmbeddingMatrix& u,
                                               const DiffusionConfig& cfg) {
  const Key key = make_key(h, u, cfg);
  if (auto hit = lookup(key)) return *std::move(hit);
  DiffusionResult r = hypernd_fixed_point(h, deg, u, cfg);
  {
    std::lock_guard lock(mutex_);
    ++misses_;
    iterations_ += r.iters;
  }
  store(key, r);
  return r;
}

std::size_t DiffusionCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}
std::size_t DiffusionCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}
std::size_t DiffusionCache::diffusion_iterations() const {
  std::lock_guard lock(mutex_);
  return iterations_;
}

// ---------------------------------------------------------------- embeddings

namespace {

DiffusionResult diffuse(const Hypergraph& h, const DegreeData& deg, const EmbeddingMatrix& u,
                        const DiffusionConfig& cfg, DiffusionCache* cache) {
  return cache ? cache->get_or_compute(h, deg, u, cfg) : hypernd_fixed_point(h, deg, u, cfg);
}

}  // namespace

EmbeddingMatrix embed_e1(const Hypergraph& h, const DegreeData& deg, const DenseMatrix& y,
                         const DiffusionConfig& cfg, double epsilon, DiffusionCache* cache) {
  return diffuse(h, deg, assemble_input(y, nullptr, epsilon), cfg, cache).f_star;
}

EmbeddingMatrix embed_e3(const Hypergraph& h, const DegreeData& deg, const DenseMatrix& y,
                         const DenseMatrix& x, const DiffusionConfig& cfg, double epsilon,
                         DiffusionCache* cache) {
  return diffuse(h, deg, assemble_input(y, &x, epsilon), cfg, cache).f_star;
}

// ---------------------------------------------------------------- splits

std::vector<std::size_t> sample_labeled(std::span<const std::size_t> labels, std::size_t classes,
                                        double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "labeled fraction must lie in (0, 1]");
  }
  std::vector<std::vector<std::size_t>> groups(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw Error(ErrorKind::ClassOutOfRange, "class id out of range", std::nullopt, i);
    groups[labels[i]].push_back(i);
  }
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labels.size())));
  std::vector<std::size_t> quota(classes, total / classes);
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].size() > groups[b].size(); });
  for (std::size_t r = 0; r < total % classes; ++r) ++quota[order[r]];

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& g = groups[c];
    std::shuffle(g.begin(), g.end(), rng);
    const std::size_t take = std::min(quota[c], g.size());
    out.insert(out.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

HalfSplit balanced_half_split(std::span<const std::size_t> labeled,
                              std::span<const std::size_t> labels, std::uint64_t seed) {
  auto groups = group_by_class(labeled, labels);
  std::mt19937_64 rng(seed);
  HalfSplit split;
  for (auto& g : groups) {
    std::sort(g.begin(), g.end());
    std::shuffle(g.begin(), g.end(), rng);
    const std::size_t train = (g.size() + 1) / 2;
    split.train.insert(split.train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(train));
    split.validation.insert(split.validation.end(), g.begin() + static_cast<std::ptrdiff_t>(train), g.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

void CVGrid::validate() const {
  if (alphas.empty() || ps.empty()) throw Error(ErrorKind::ConfigError, "empty CV grid");
  if (repeats < 1) throw Error(ErrorKind::ConfigError, "repeats must be at least 1");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorKind::ConfigError, "grid alpha outside (0, 1)");
  for (double p : ps) (void)MixingFamily::power_mean(p);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

// ---------------------------------------------------------------- CV

CVResult run_cv(const Hypergraph& h, const DegreeData& deg, std::span<const std::size_t> labels,
                std::size_t classes, const DenseMatrix* x, const CVGrid& grid,
                const SplitSpec& split, const ExperimentOptions& opts, DiffusionCache& cache) {
  grid.validate();
  const std::size_t n = h.num_nodes();
  const std::vector<std::size_t> labeled =
      split.train_ids.empty() ? sample_labeled(labels.first(n), classes, split.fraction, split.seed)
                              : split.train_ids;

  std::vector<bool> in_dataset(classes, false), in_labeled(classes, false);
  for (std::size_t i = 0; i < n; ++i) in_dataset[labels[i]] = true;
  for (std::size_t id : labeled) in_labeled[labels[id]] = true;
  for (std::size_t c = 0; c < classes; ++c) {
    if (in_dataset[c] && !in_labeled[c]) {
      throw Error(ErrorKind::MissingClassInTrain,
                  "class " + std::to_string(c) + " has no labeled node", std::nullopt, c);
    }
  }

  CVResult result;
  const std::size_t cells = grid.alphas.size() * grid.ps.size();
  result.cells.resize(cells);
  for (std::size_t a = 0; a < grid.alphas.size(); ++a)
    for (std::size_t q = 0; q < grid.ps.size(); ++q) {
      auto& cell = result.cells[a * grid.ps.size() + q];
      cell.alpha = grid.alphas[a];
      cell.p = grid.ps[q];
      cell.accuracies.assign(grid.repeats, 0.0);
    }
  std::vector<double> log_losses(cells * grid.repeats, 0.0);

  const DenseMatrix* features = opts.use_features ? x : nullptr;
  std::vector<double> diff_ms(cells * grid.repeats, 0.0), train_ms(cells * grid.repeats, 0.0);

  for (std::size_t r = 0; r < grid.repeats; ++r) {
    const std::uint64_t seed = detail::mix_seed(split.seed, r);
    result.repeat_seeds.push_back(seed);
    const HalfSplit half = balanced_half_split(labeled, labels, seed);
    if (half.validation.empty()) {
      throw Error(ErrorKind::EmptyEvalSet, "validation half is empty; label more nodes");
    }
    const EmbeddingMatrix u =
        assemble_input(label_matrix(labels, half.train, n, classes), features, opts.epsilon);

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < cells; ++c) {
      try {
        auto& cell = result.cells[c];
        DiffusionConfig cfg;
        cfg.alpha = cell.alpha;
        cfg.mix = MixingFamily::power_mean(cell.p);
        cfg.tol = opts.tol;
        cfg.max_iters = opts.max_iters;
        auto t0 = Clock::now();
        const DiffusionResult d = cache.get_or_compute(h, deg, u, cfg);
        diff_ms[c * grid.repeats + r] = ms_since(t0);
        if (!d.converged) {
#pragma omp atomic
          ++cell.unconverged;
        }
        t0 = Clock::now();
        const SoftmaxModel model = train_softmax(d.f_star, labels, half.train, classes, opts.train);
        const Prediction pred = predict(model, d.f_star);
        cell.accuracies[r] = accuracy(pred.classes, labels, half.validation);
        double ll = 0.0;
        for (std::size_t v : half.validation)
          ll -= std::log(std::max(pred.probabilities(v, labels[v]), 1e-300));
        log_losses[c * grid.repeats + r] = ll / static_cast<double>(half.validation.size());
        train_ms[c * grid.repeats + r] = ms_since(t0);
      } catch (...) {
#pragma omp critical(hyperdiff_cv_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t c = 0; c < cells; ++c) {
    auto& cell = result.cells[c];
    const Summary s = summarize(cell.accuracies);
    cell.mean = s.mean;
    cell.stddev = s.stddev;
    cell.log_loss = summarize(std::span<const double>(log_losses).subspan(c * grid.repeats, grid.repeats)).mean;
  }
  result.diffusion_ms = std::accumulate(diff_ms.begin(), diff_ms.end(), 0.0);
  result.training_ms = std::accumulate(train_ms.begin(), train_ms.end(), 0.0);

  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = result.cells[a];
    const auto& cb = result.cells[b];
    return ca.alpha != cb.alpha ? ca.alpha < cb.alpha : ca.p < cb.p;
  });
  std::size_t best = order.front();
  for (std::size_t idx : order) {
    const auto& cand = result.cells[idx];
    const auto& cur = result.cells[best];
    if (cand.mean > cur.mean || (cand.mean == cur.mean && cand.log_loss < cur.log_loss)) best = idx;
  }
  result.best_alpha = result.cells[best].alpha;
  result.best_p = result.cells[best].p;
  return result;
}

// ---------------------------------------------------------------- evaluation

EvaluationReport evaluate(std::vector<SampleOutcome> samples, const CVGrid& grid) {
  EvaluationReport report;
  report.grid = grid;
  std::vector<double> acc;
  for (const auto& s : samples) {
    acc.push_back(s.test_accuracy);
    report.diffusion_ms += s.diffusion_ms;
    report.training_ms += s.training_ms;
  }
  report.accuracy = summarize(acc);
  if (!samples.empty() && !samples.front().cv.cells.empty()) {
    report.mean_grid = samples.front().cv.cells;
    for (std::size_t c = 0; c < report.mean_grid.size(); ++c) {
      std::vector<double> means;
      for (const auto& s : samples) means.push_back(s.cv.cells[c].mean);
      const Summary sm = summarize(means);
      auto& cell = report.mean_grid[c];
      cell.accuracies = means;
      cell.mean = sm.mean;
      cell.stddev = sm.stddev;
      double ll = 0.0;
      for (const auto& s : samples) ll += s.cv.cells[c].log_loss;
      cell.log_loss = ll / static_cast<double>(samples.size());
      cell.unconverged = 0;
      for (const auto& s : samples) cell.unconverged += s.cv.cells[c].unconverged;
    }
  }
  report.samples = std::move(samples);
  return report;
}

EvaluationReport run_experiment(const Hypergraph& h, const DegreeData& deg,
                                std::span<const std::size_t> labels, std::size_t classes,
                                const DenseMatrix* x, const CVGrid& grid, double labeled_fraction,
                                std::size_t samples, std::uint64_t seed,
                                const ExperimentOptions& opts, DiffusionCache& cache) {
  const std::size_t n = h.num_nodes();
  std::vector<SampleOutcome> outcomes;
  for (std::size_t s = 0; s < samples; ++s) {
    SampleOutcome out;
    out.seed = detail::mix_seed(seed, 1000 + s);
    out.labeled = sample_labeled(labels.first(n), classes, labeled_fraction, out.seed);

    SplitSpec split;
    split.train_ids = out.labeled;
    split.seed = out.seed;
    out.cv = run_cv(h, deg, labels, classes, x, grid, split, opts, cache);
    out.diffusion_ms = out.cv.diffusion_ms;
    out.training_ms = out.cv.training_ms;

    std::vector<std::size_t> test;
    std::vector<bool> is_labeled(n, false);
    for (std::size_t id : out.labeled) is_labeled[id] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!is_labeled[i]) test.push_back(i);
    const DenseMatrix* features = opts.use_features ? x : nullptr;
    const EmbeddingMatrix u =
        assemble_input(label_matrix(labels, out.labeled, n, classes), features, opts.epsilon);
    DiffusionConfig cfg;
    cfg.alpha = out.cv.best_alpha;
    cfg.mix = MixingFamily::power_mean(out.cv.best_p);
    cfg.tol = opts.tol;
    cfg.max_iters = opts.max_iters;

    auto t0 = Clock::now();
    const DiffusionResult d = cache.get_or_compute(h, deg, u, cfg);
    out.diffusion_ms += ms_since(t0);
    t0 = Clock::now();
    const SoftmaxModel model = train_softmax(d.f_star, labels, out.labeled, classes, opts.train);
    const Prediction pred = predict(model, d.f_star);
    out.test_accuracy = accuracy(pred.classes, labels, test);
    out.training_ms += ms_since(t0);
    outcomes.push_back(std::move(out));
  }
  return evaluate(std::move(outcomes), grid);
}

}  // namespace hyperdiff
