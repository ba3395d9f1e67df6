// hyperdiff command-line driver. Every subcommand resolves its full
// configuration, runs, and writes a replay file next to its main output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperdiff/classifier.hpp"
#include "hyperdiff/diffusion.hpp"
#include "hyperdiff/error.hpp"
#include "hyperdiff/io.hpp"
#include "hyperdiff/parallel.hpp"
#include "hyperdiff/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperdiff;

namespace {

struct Common {
  bool json_output = false;
};

std::string num(double v) { return format_double(v); }

void write_replay(const fs::path& path, const std::vector<std::string>& argv, const json& config) {
  json j;
  j["tool"] = "hyperdiff";
  j["format"] = 1;
  j["argv"] = argv;
  j["config"] = config;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

fs::path replay_path_for(const fs::path& output) { return fs::path(output.string() + ".replay.json"); }

void emit(const Common& common, const json& report, const std::string& human) {
  if (common.json_output) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::cout << human;
  }
}

std::vector<std::size_t> resolve_train_ids(const Dataset& ds, const std::string& flag) {
  if (!flag.empty()) return read_id_list(flag);
  if (ds.manifest.train_ids_path) return read_id_list(*ds.manifest.train_ids_path);
  throw Error(ErrorKind::ConfigError,
              "no training ids: pass --train-ids or set train_ids in the manifest");
}

EmbeddingMatrix build_input(const Dataset& ds, const std::vector<std::size_t>& train_ids,
                            double epsilon, bool use_features) {
  const DenseMatrix y = label_matrix(ds.labels, train_ids, ds.hypergraph.num_nodes(), ds.manifest.c);
  const DenseMatrix* x = use_features && ds.features ? &*ds.features : nullptr;
  return assemble_input(y, x, epsilon);
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& ids) {
  std::vector<bool> in(n, false);
  for (std::size_t id : ids) in[id] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- diffuse

struct DiffuseArgs {
  std::string manifest, out, train_ids, cache, diagnostics, replay;
  double alpha = 0.5, p = 1.0, tol = 1e-6, epsilon = kDefaultSmoothing;
  std::size_t max_iters = 500;
  bool no_features = false;
};

int run_diffuse(const DiffuseArgs& a, const Common& common) {
  const Dataset ds = load_dataset(a.manifest);
  const DegreeData deg = degree_data(ds.hypergraph);
  const auto train_ids = resolve_train_ids(ds, a.train_ids);
  const EmbeddingMatrix u = build_input(ds, train_ids, a.epsilon, !a.no_features);

  DiffusionConfig cfg;
  cfg.alpha = a.alpha;
  cfg.mix = MixingFamily::power_mean(a.p);
  cfg.tol = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.validate();

  DiffusionResult r;
  std::size_t hits = 0;
  if (!a.cache.empty()) {
    DiffusionCache cache{fs::path(a.cache)};
    r = cache.get_or_compute(ds.hypergraph, deg, u, cfg);
    hits = cache.hits();
  } else {
    r = hypernd_fixed_point(ds.hypergraph, deg, u, cfg);
  }
  save_embedding(r.f_star, a.out);
  const fs::path diag = a.diagnostics.empty() ? fs::path(a.out + ".diag.csv") : fs::path(a.diagnostics);
  write_diagnostics_csv(r, diag);

  json config = {{"manifest", a.manifest}, {"alpha", a.alpha}, {"lambda", cfg.lambda()},
                 {"p", a.p}, {"tol", a.tol}, {"max_iters", a.max_iters},
                 {"epsilon", a.epsilon}, {"features", !a.no_features},
                 {"train_ids", train_ids.size()}};
  std::vector<std::string> argv = {"diffuse", "--manifest", a.manifest, "--alpha", num(a.alpha),
                                   "--p", num(a.p), "--tol", num(a.tol), "--max-iters",
                                   std::to_string(a.max_iters), "--epsilon", num(a.epsilon),
                                   "--out", a.out, "--diagnostics", diag.string()};
  if (!a.train_ids.empty()) argv.insert(argv.end(), {"--train-ids", a.train_ids});
  if (a.no_features) argv.push_back("--no-features");
  if (!a.cache.empty()) argv.insert(argv.end(), {"--cache", a.cache});
  write_replay(a.replay.empty() ? replay_path_for(a.out) : fs::path(a.replay), argv, config);

  const double last = r.residual_history.empty() ? 0.0 : r.residual_history.back();
  json report = {{"command", "diffuse"}, {"converged", r.converged}, {"iters", r.iters},
                 {"final_residual", last}, {"rows", r.f_star.rows()}, {"cols", r.f_star.cols()},
                 {"lambda", cfg.lambda()}, {"cache_hits", hits}, {"embedding", a.out},
                 {"diagnostics", diag.string()}};
  std::ostringstream human;
  human << "diffuse: " << (r.converged ? "converged" : "NOT converged") << " after " << r.iters
        << " iterations (residual " << last << ", alpha " << a.alpha << ", lambda " << cfg.lambda()
        << ", p " << a.p << ")\n"
        << "embedding " << r.f_star.rows() << " x " << r.f_star.cols() << " -> " << a.out << '\n';
  emit(common, report, human.str());
  if (!r.converged) std::cerr << "warning: diffusion hit max_iters without converging\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string emb, manifest, train_ids, cache, model_out, pred_out, replay;
  double alpha = 0.5, p = 1.0, tol = 1e-6, epsilon = kDefaultSmoothing;
  std::size_t max_iters = 500;
  bool no_features = false;
  TrainConfig train;
  bool no_standardize = false;
};

int run_train(TrainArgs a, const Common& common) {
  a.train.standardize = !a.no_standardize;
  const Dataset ds = load_dataset(a.manifest);
  const auto train_ids = resolve_train_ids(ds, a.train_ids);

  EmbeddingMatrix f;
  std::size_t hits = 0, iterations = 0;
  if (!a.emb.empty()) {
    f = load_embedding(a.emb);
  } else if (!a.cache.empty()) {
    const DegreeData deg = degree_data(ds.hypergraph);
    const EmbeddingMatrix u = build_input(ds, train_ids, a.epsilon, !a.no_features);
    DiffusionConfig cfg;
    cfg.alpha = a.alpha;
    cfg.mix = MixingFamily::power_mean(a.p);
    cfg.tol = a.tol;
    cfg.max_iters = a.max_iters;
    DiffusionCache cache{fs::path(a.cache)};
    f = cache.get_or_compute(ds.hypergraph, deg, u, cfg).f_star;
    hits = cache.hits();
    iterations = cache.diffusion_iterations();
  } else {
    throw Error(ErrorKind::ConfigError, "train needs --emb or --cache");
  }
  if (f.rows() != ds.hypergraph.num_nodes()) {
    throw Error(ErrorKind::DimensionMismatch, "embedding rows differ from dataset node count");
  }

  const SoftmaxModel model = train_softmax(f, ds.labels, train_ids, ds.manifest.c, a.train);
  const Prediction pred = predict(model, f);
  const auto eval_ids = complement(ds.hypergraph.num_nodes(), train_ids);
  const double train_acc = accuracy(pred.classes, ds.labels, train_ids);
  const double acc = eval_ids.empty() ? train_acc : accuracy(pred.classes, ds.labels, eval_ids);

  const std::string model_out = a.model_out.empty() ? "model.csv" : a.model_out;
  save_model(model, model_out);
  if (!a.pred_out.empty()) {
    std::ofstream out(a.pred_out);
    for (std::size_t i = 0; i < pred.classes.size(); ++i) out << i << ' ' << pred.classes[i] << '\n';
  }

  std::vector<std::string> argv = {"train", "--manifest", a.manifest,
                                   "--epochs", std::to_string(a.train.epochs),
                                   "--lr", num(a.train.learning_rate), "--l2", num(a.train.l2),
                                   "--seed", std::to_string(a.train.seed), "--model-out", model_out};
  if (!a.emb.empty()) argv.insert(argv.end(), {"--emb", a.emb});
  if (!a.cache.empty()) {
    argv.insert(argv.end(), {"--cache", a.cache, "--alpha", num(a.alpha), "--p", num(a.p), "--tol",
                             num(a.tol), "--max-iters", std::to_string(a.max_iters), "--epsilon",
                             num(a.epsilon)});
    if (a.no_features) argv.push_back("--no-features");
  }
  if (!a.train_ids.empty()) argv.insert(argv.end(), {"--train-ids", a.train_ids});
  if (!a.pred_out.empty()) argv.insert(argv.end(), {"--pred-out", a.pred_out});
  if (a.no_standardize) argv.push_back("--no-standardize");
  json config = {{"epochs", a.train.epochs}, {"learning_rate", a.train.learning_rate},
                 {"l2", a.train.l2}, {"seed", a.train.seed}, {"standardize", a.train.standardize}};
  write_replay(a.replay.empty() ? replay_path_for(model_out) : fs::path(a.replay), argv, config);

  json report = {{"command", "train"}, {"accuracy", acc}, {"train_accuracy", train_acc},
                 {"eval_nodes", eval_ids.size()}, {"train_nodes", train_ids.size()},
                 {"final_loss", model.loss_history.back()}, {"diffusion_iterations", iterations},
                 {"cache_hits", hits}, {"model", model_out}};
  std::ostringstream human;
  human << "train: accuracy " << acc << " on " << eval_ids.size() << " held-out nodes (train "
        << train_acc << "), diffusion iterations " << iterations << ", cache hits " << hits << '\n';
  emit(common, report, human.str());
  return 0;
}

// ---------------------------------------------------------------- cv

struct CvArgs {
  std::string manifest, grid = "default", out_json, out_csv, cache, replay;
  double labeled_frac = 0.052, tol = 1e-6, epsilon = kDefaultSmoothing;
  std::size_t repeats = 5, samples = 5, max_iters = 500;
  std::uint64_t seed = 0;
  bool no_features = false;
  TrainConfig train;
};

CVGrid load_grid(const std::string& spec, std::size_t repeats) {
  CVGrid grid;
  if (spec != "default") {
    std::ifstream in(spec);
    if (!in) throw Error(ErrorKind::IoError, "cannot open grid file " + spec);
    const json j = json::parse(in);
    if (j.contains("alphas")) grid.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("ps")) grid.ps = j["ps"].get<std::vector<double>>();
  }
  grid.repeats = repeats;
  grid.validate();
  return grid;
}

json cell_json(const CVCell& c) {
  return {{"alpha", c.alpha}, {"p", c.p}, {"mean", c.mean}, {"std", c.stddev},
          {"values", c.accuracies}, {"unconverged", c.unconverged}};
}

int run_cv_command(const CvArgs& a, const Common& common) {
  const Dataset ds = load_dataset(a.manifest);
  const DegreeData deg = degree_data(ds.hypergraph);
  const CVGrid grid = load_grid(a.grid, a.repeats);
  ExperimentOptions opts;
  opts.epsilon = a.epsilon;
  opts.tol = a.tol;
  opts.max_iters = a.max_iters;
  opts.train = a.train;
  opts.use_features = !a.no_features;

  DiffusionCache cache = a.cache.empty() ? DiffusionCache{} : DiffusionCache{fs::path(a.cache)};
  const DenseMatrix* x = ds.features ? &*ds.features : nullptr;
  const EvaluationReport report =
      run_experiment(ds.hypergraph, deg, ds.labels, ds.manifest.c, x, grid, a.labeled_frac,
                     a.samples, a.seed, opts, cache);

  json j;
  j["command"] = "cv";
  j["dataset"] = ds.manifest.name;
  j["accuracy"] = {{"mean", report.accuracy.mean}, {"std", report.accuracy.stddev},
                   {"count", report.accuracy.count}};
  j["timing_ms"] = {{"diffusion", report.diffusion_ms}, {"training", report.training_ms}};
  j["grid"] = json::array();
  for (const auto& c : report.mean_grid) j["grid"].push_back(cell_json(c));
  j["samples"] = json::array();
  for (const auto& s : report.samples) {
    j["samples"].push_back({{"seed", s.seed}, {"labeled", s.labeled.size()},
                            {"best_alpha", s.cv.best_alpha}, {"best_p", s.cv.best_p},
                            {"test_accuracy", s.test_accuracy},
                            {"repeat_seeds", s.cv.repeat_seeds},
                            {"diffusion_ms", s.diffusion_ms}, {"training_ms", s.training_ms}});
  }
  j["cache"] = {{"hits", cache.hits()}, {"misses", cache.misses()},
                {"diffusion_iterations", cache.diffusion_iterations()}};
  j["config"] = {{"labeled_fraction", a.labeled_frac}, {"repeats", a.repeats},
                 {"samples", a.samples}, {"seed", a.seed}, {"tol", a.tol},
                 {"max_iters", a.max_iters}, {"epsilon", a.epsilon},
                 {"features", !a.no_features}, {"alphas", grid.alphas}, {"ps", grid.ps}};

  const std::string out_json = a.out_json.empty() ? "cv_report.json" : a.out_json;
  {
    std::ofstream out(out_json);
    out << j.dump(2) << '\n';
  }
  if (!a.out_csv.empty()) {
    std::ofstream out(a.out_csv);
    out << "alpha,p,mean_accuracy,std_accuracy,unconverged\n";
    for (const auto& c : report.mean_grid)
      out << num(c.alpha) << ',' << num(c.p) << ',' << num(c.mean) << ',' << num(c.stddev) << ','
          << c.unconverged << '\n';
  }
  std::vector<std::string> argv = {"cv", "--manifest", a.manifest, "--grid", a.grid,
                                   "--labeled-frac", num(a.labeled_frac), "--repeats",
                                   std::to_string(a.repeats), "--samples", std::to_string(a.samples),
                                   "--seed", std::to_string(a.seed), "--tol", num(a.tol),
                                   "--max-iters", std::to_string(a.max_iters), "--epsilon",
                                   num(a.epsilon), "--epochs", std::to_string(a.train.epochs),
                                   "--lr", num(a.train.learning_rate), "--l2", num(a.train.l2),
                                   "--out-json", out_json};
  if (!a.out_csv.empty()) argv.insert(argv.end(), {"--out-csv", a.out_csv});
  if (a.no_features) argv.push_back("--no-features");
  write_replay(a.replay.empty() ? replay_path_for(out_json) : fs::path(a.replay), argv, j["config"]);

  std::ostringstream human;
  human << "cv on " << ds.manifest.name << ": test accuracy " << report.accuracy.mean << " +- "
        << report.accuracy.stddev << " over " << report.accuracy.count << " samples\n";
  human << "  alpha      p   mean_val_acc\n";
  for (const auto& c : report.mean_grid) {
    char line[96];
    std::snprintf(line, sizeof line, "  %5.2f %6.2f   %.4f\n", c.alpha, c.p, c.mean);
    human << line;
  }
  for (const auto& s : report.samples)
    human << "  sample seed " << s.seed << ": alpha " << s.cv.best_alpha << ", p " << s.cv.best_p
          << ", test " << s.test_accuracy << '\n';
  human << "report -> " << out_json << '\n';
  emit(common, j, human.str());
  return 0;
}

// ---------------------------------------------------------------- hls

struct HlsArgs {
  std::string manifest, train_ids, out, replay;
  double alpha = 0.5, tol = 1e-6;
  std::size_t max_iters = 500;
};

int run_hls(const HlsArgs& a, const Common& common) {
  const Dataset ds = load_dataset(a.manifest);
  const DegreeData deg = degree_data(ds.hypergraph);
  const auto train_ids = resolve_train_ids(ds, a.train_ids);
  const std::size_t n = ds.hypergraph.num_nodes();
  const DenseMatrix y = label_matrix(ds.labels, train_ids, n, ds.manifest.c);
  const DiffusionResult r = linear_hls(ds.hypergraph, deg, y, a.alpha, a.tol, a.max_iters);

  std::vector<std::size_t> pred(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = r.f_star.row(i);
    pred[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  const auto eval_ids = complement(n, train_ids);
  const double acc = eval_ids.empty() ? 1.0 : accuracy(pred, ds.labels, eval_ids);
  const std::string out = a.out.empty() ? "hls.emb" : a.out;
  save_embedding(r.f_star, out);
  write_diagnostics_csv(r, out + ".diag.csv");

  std::vector<std::string> argv = {"hls", "--manifest", a.manifest, "--alpha", num(a.alpha),
                                   "--tol", num(a.tol), "--max-iters", std::to_string(a.max_iters),
                                   "--out", out};
  if (!a.train_ids.empty()) argv.insert(argv.end(), {"--train-ids", a.train_ids});
  write_replay(a.replay.empty() ? replay_path_for(out) : fs::path(a.replay), argv,
               {{"alpha", a.alpha}, {"tol", a.tol}, {"max_iters", a.max_iters}});

  json report = {{"command", "hls"}, {"converged", r.converged}, {"iters", r.iters},
                 {"accuracy", acc}, {"eval_nodes", eval_ids.size()}, {"embedding", out}};
  std::ostringstream human;
  human << "hls: " << (r.converged ? "converged" : "NOT converged") << " after " << r.iters
        << " iterations; argmax accuracy " << acc << " on " << eval_ids.size() << " nodes\n";
  emit(common, report, human.str());
  return 0;
}

// ---------------------------------------------------------------- demo

struct DemoArgs {
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  std::string out, replay;
};

int run_demo(const DemoArgs& a, const Common& common) {
  const NonconvergenceDemo demo = nonconvergence_demo(a.steps, a.seed);
  const std::string out = a.out.empty() ? "nonconvergence.csv" : a.out;
  {
    std::ofstream csv(out);
    csv << "k,x0,x1,x2,z0,z1,z2,residual_x,residual_z\n";
    for (std::size_t k = 0; k < a.steps; ++k) {
      csv << (k + 1);
      for (int c = 0; c < 3; ++c)
        csv << ',' << (k < demo.normalized.states.size() ? num(demo.normalized.states[k][c]) : "nan");
      for (int c = 0; c < 3; ++c)
        csv << ',' << (k < demo.raw.states.size() ? num(demo.raw.states[k][c]) : "nan");
      csv << ',' << (k < demo.normalized.residuals.size() ? num(demo.normalized.residuals[k]) : "nan");
      csv << ',' << (k < demo.raw.residuals.size() ? num(demo.raw.residuals[k]) : "nan");
      csv << '\n';
    }
  }
  write_replay(a.replay.empty() ? replay_path_for(out) : fs::path(a.replay),
               {"demo-nonconvergence", "--steps", std::to_string(a.steps), "--seed",
                std::to_string(a.seed), "--out", out},
               {{"steps", a.steps}, {"seed", a.seed}});

  json report = {
      {"command", "demo-nonconvergence"},
      {"start", demo.start},
      {"normalized", {{"min_residual", demo.normalized_report.min_residual},
                      {"max_residual_last_100", demo.normalized_report.max_residual_tail},
                      {"settled", demo.normalized_report.settled}}},
      {"raw", {{"min_residual", demo.raw_report.min_residual},
               {"diverged_at", demo.raw.diverged_at ? json(*demo.raw.diverged_at) : json(nullptr)},
               {"settled", demo.raw_report.settled}}},
      {"csv", out}};
  std::ostringstream human;
  human << "normalized sequence: min residual " << demo.normalized_report.min_residual
        << (demo.normalized_report.settled ? " (settled)" : " (never below 1e-3)") << '\n';
  human << "raw sequence: "
        << (demo.raw.diverged_at ? "overflowed at step " + std::to_string(*demo.raw.diverged_at)
                                 : "finite throughout")
        << '\n'
        << "trajectory -> " << out << '\n';
  emit(common, report, human.str());
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string manifest, train_ids;
  double alpha = 0.5, p = 2.0;
  std::size_t iters = 50;
};

int run_bench(const BenchArgs& a, const Common& common) {
  const Dataset ds = load_dataset(a.manifest);
  const DegreeData deg = degree_data(ds.hypergraph);
  std::vector<std::size_t> train_ids;
  if (!a.train_ids.empty() || ds.manifest.train_ids_path) {
    train_ids = resolve_train_ids(ds, a.train_ids);
  } else {
    train_ids = sample_labeled(ds.labels, ds.manifest.c, 0.05, 0);
  }
  const EmbeddingMatrix u = build_input(ds, train_ids, kDefaultSmoothing, true);
  DiffusionConfig cfg;
  cfg.alpha = a.alpha;
  cfg.mix = MixingFamily::power_mean(a.p);
  cfg.tol = 1e-300;
  cfg.max_iters = a.iters;
  const DiffusionResult r = hypernd_fixed_point(ds.hypergraph, deg, u, cfg);

  std::vector<double> per_iter;
  for (std::size_t k = 0; k < r.elapsed_ms.size(); ++k)
    per_iter.push_back(r.elapsed_ms[k] - (k ? r.elapsed_ms[k - 1] : 0.0));
  std::vector<double> sorted = per_iter;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    return sorted.empty() ? 0.0 : sorted[static_cast<std::size_t>(q * (sorted.size() - 1))];
  };
  const Summary s = summarize(per_iter);
  json report = {{"command", "bench"}, {"dataset", ds.manifest.name},
                 {"nnz", ds.hypergraph.nnz()}, {"columns", u.cols()},
                 {"threads", thread_count()}, {"iterations", per_iter.size()},
                 {"median_ms", quantile(0.5)}, {"mean_ms", s.mean}, {"std_ms", s.stddev},
                 {"min_ms", sorted.empty() ? 0.0 : sorted.front()}, {"p90_ms", quantile(0.9)},
                 {"max_ms", sorted.empty() ? 0.0 : sorted.back()}};
  std::ostringstream human;
  human << "bench " << ds.manifest.name << ": nnz(K) " << ds.hypergraph.nnz() << ", " << u.cols()
        << " columns, " << thread_count() << " threads\n"
        << "  per iteration ms: median " << quantile(0.5) << ", mean " << s.mean << ", min "
        << (sorted.empty() ? 0.0 : sorted.front()) << ", p90 " << quantile(0.9) << '\n';
  emit(common, report, human.str());
  return 0;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::string manifest, out_dir;
};

void copy_labels(const DatasetManifest& src, DatasetManifest& dst, const fs::path& dir) {
  dst.labels_path = dir / "labels.txt";
  fs::copy_file(src.labels_path, dst.labels_path, fs::copy_options::overwrite_existing);
  if (src.train_ids_path) {
    dst.train_ids_path = dir / "train_ids.txt";
    fs::copy_file(*src.train_ids_path, *dst.train_ids_path, fs::copy_options::overwrite_existing);
  }
}

int run_shift_features(const PreprocessArgs& a, const Common& common) {
  const Dataset ds = load_dataset(a.manifest);
  if (!ds.features) throw Error(ErrorKind::ConfigError, "dataset has no features to shift");
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  DenseMatrix x = *ds.features;
  double lo = 0.0;
  for (double v : x.values()) lo = std::min(lo, v);
  for (double& v : x.values()) v -= lo;

  DatasetManifest m = ds.manifest;
  m.hyperedges_path = dir / "hyperedges.txt";
  m.weights_path = dir / "weights.txt";
  write_hypergraph(ds.hypergraph, m.hyperedges_path, m.weights_path);
  m.features_path = dir / "features.csv";
  m.features_format = FeatureFormat::DenseCsv;
  write_features_csv(x, *m.features_path);
  copy_labels(ds.manifest, m, dir);
  write_manifest(m, dir / "manifest.json");
  emit(common, {{"command", "preprocess shift-features"}, {"shift", 0.0 - lo},
                {"manifest", (dir / "manifest.json").string()}},
       "shifted features by " + num(0.0 - lo) + " -> " + (dir / "manifest.json").string() + "\n");
  return 0;
}

int run_add_self_loops(const PreprocessArgs& a, const Common& common) {
  DatasetManifest m = read_manifest(a.manifest);
  auto edges = read_hyperedges(m.hyperedges_path);
  std::vector<double> weights = m.weights_path ? read_weights(*m.weights_path) : std::vector<double>{};
  std::vector<bool> covered(m.n, false);
  for (const auto& e : edges)
    for (std::size_t v : e)
      if (v < m.n) covered[v] = true;
  std::size_t added = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (!covered[i]) {
      edges.push_back({i});
      if (!weights.empty()) weights.push_back(1.0);
      ++added;
    }
  }
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const DatasetManifest src = m;
  {
    std::ofstream out(dir / "hyperedges.txt");
    for (const auto& e : edges) {
      for (std::size_t k = 0; k < e.size(); ++k) out << (k ? " " : "") << e[k];
      out << '\n';
    }
  }
  m.hyperedges_path = dir / "hyperedges.txt";
  if (!weights.empty()) {
    m.weights_path = dir / "weights.txt";
    std::ofstream out(*m.weights_path);
    for (double w : weights) out << num(w) << '\n';
  }
  if (m.features_path) {
    const fs::path dst = dir / m.features_path->filename();
    fs::copy_file(*m.features_path, dst, fs::copy_options::overwrite_existing);
    m.features_path = dst;
  }
  copy_labels(src, m, dir);
  m.m = edges.size();
  m.self_loops = m.self_loops || added > 0;
  write_manifest(m, dir / "manifest.json");
  // Validate the repaired dataset.
  (void)load_dataset(dir / "manifest.json");
  emit(common, {{"command", "preprocess add-self-loops"}, {"added", added},
                {"manifest", (dir / "manifest.json").string()}},
       "added " + std::to_string(added) + " self-loops -> " + (dir / "manifest.json").string() + "\n");
  return 0;
}

// ---------------------------------------------------------------- dispatch

int dispatch(std::vector<std::string> args);

void print_error(std::string_view kind, const std::string& message, std::optional<std::size_t> line) {
  json j = {{"error", kind}, {"message", message}};
  if (line) j["line"] = *line;
  std::cerr << j.dump() << '\n';
}

int dispatch(std::vector<std::string> args) {
  CLI::App app{"Nonlinear hypergraph diffusion for semi-supervised node classification",
               "hyperdiff"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("--json", common.json_output, "Machine-readable output on stdout");

  DiffuseArgs diffuse;
  auto* c_diffuse = app.add_subcommand("diffuse", "Compute the normalized diffusion fixed point");
  c_diffuse->add_option("--manifest", diffuse.manifest, "Dataset manifest")->required();
  c_diffuse->add_option("--alpha", diffuse.alpha, "Mixing coefficient in (0, 1)")->required();
  c_diffuse->add_option("--p", diffuse.p, "Power-mean exponent")->required();
  c_diffuse->add_option("--tol", diffuse.tol, "Relative-change tolerance");
  c_diffuse->add_option("--max-iters", diffuse.max_iters, "Iteration cap");
  c_diffuse->add_option("--epsilon", diffuse.epsilon, "Label smoothing");
  c_diffuse->add_option("--train-ids", diffuse.train_ids, "Labeled node ids (one per line)");
  c_diffuse->add_flag("--no-features", diffuse.no_features, "Diffuse labels only");
  c_diffuse->add_option("--cache", diffuse.cache, "Diffusion cache directory");
  c_diffuse->add_option("--diagnostics", diffuse.diagnostics, "Diagnostics CSV path");
  c_diffuse->add_option("--replay", diffuse.replay, "Replay file path");
  c_diffuse->add_option("--out", diffuse.out, "Embedding output")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the softmax layer on an embedding");
  c_train->add_option("--emb", train.emb, "Embedding file from diffuse");
  c_train->add_option("--cache", train.cache, "Diffusion cache directory (instead of --emb)");
  c_train->add_option("--alpha", train.alpha, "Cache lookup: alpha");
  c_train->add_option("--p", train.p, "Cache lookup: p");
  c_train->add_option("--tol", train.tol, "Cache lookup: tol");
  c_train->add_option("--max-iters", train.max_iters, "Cache lookup: max iterations");
  c_train->add_option("--epsilon", train.epsilon, "Cache lookup: smoothing");
  c_train->add_flag("--no-features", train.no_features, "Cache lookup: label-only input");
  c_train->add_option("--manifest", train.manifest, "Dataset manifest")->required();
  c_train->add_option("--train-ids", train.train_ids, "Training node ids");
  c_train->add_option("--epochs", train.train.epochs, "Epochs");
  c_train->add_option("--lr", train.train.learning_rate, "Learning rate");
  c_train->add_option("--l2", train.train.l2, "Ridge coefficient");
  c_train->add_option("--seed", train.train.seed, "Initialization seed");
  c_train->add_flag("--no-standardize", train.no_standardize, "Use raw embedding columns");
  c_train->add_option("--model-out", train.model_out, "Model output (CSV)");
  c_train->add_option("--pred-out", train.pred_out, "Predictions output");
  c_train->add_option("--replay", train.replay, "Replay file path");

  CvArgs cv;
  auto* c_cv = app.add_subcommand("cv", "Cross-validated evaluation over the (alpha, p) grid");
  c_cv->add_option("--manifest", cv.manifest, "Dataset manifest")->required();
  c_cv->add_option("--grid", cv.grid, "'default' or a JSON file with alphas/ps");
  c_cv->add_option("--labeled-frac", cv.labeled_frac, "Fraction of labeled nodes");
  c_cv->add_option("--repeats", cv.repeats, "50/50 validation repeats per cell");
  c_cv->add_option("--samples", cv.samples, "Independent labeled-set samples");
  c_cv->add_option("--seed", cv.seed, "Seed");
  c_cv->add_option("--tol", cv.tol, "Diffusion tolerance");
  c_cv->add_option("--max-iters", cv.max_iters, "Diffusion iteration cap");
  c_cv->add_option("--epsilon", cv.epsilon, "Label smoothing");
  c_cv->add_flag("--no-features", cv.no_features, "Diffuse labels only");
  c_cv->add_option("--epochs", cv.train.epochs, "Classifier epochs");
  c_cv->add_option("--lr", cv.train.learning_rate, "Classifier learning rate");
  c_cv->add_option("--l2", cv.train.l2, "Classifier ridge");
  c_cv->add_option("--cache", cv.cache, "Diffusion cache directory");
  c_cv->add_option("--out-json", cv.out_json, "JSON report");
  c_cv->add_option("--out-csv", cv.out_csv, "Flat CSV of the grid");
  c_cv->add_option("--replay", cv.replay, "Replay file path");

  HlsArgs hls;
  auto* c_hls = app.add_subcommand("hls", "Linear hypergraph label spreading baseline");
  c_hls->add_option("--manifest", hls.manifest, "Dataset manifest")->required();
  c_hls->add_option("--alpha", hls.alpha, "Mixing coefficient")->required();
  c_hls->add_option("--tol", hls.tol, "Tolerance");
  c_hls->add_option("--max-iters", hls.max_iters, "Iteration cap");
  c_hls->add_option("--train-ids", hls.train_ids, "Labeled node ids");
  c_hls->add_option("--out", hls.out, "Embedding output");
  c_hls->add_option("--replay", hls.replay, "Replay file path");

  DemoArgs demo;
  auto* c_demo = app.add_subcommand("demo-nonconvergence", "Trajectory of a non-convergent normalized iteration");
  c_demo->add_option("--steps", demo.steps, "Steps")->check(CLI::PositiveNumber);
  c_demo->add_option("--seed", demo.seed, "Seed for the starting point");
  c_demo->add_option("--out", demo.out, "CSV output");
  c_demo->add_option("--replay", demo.replay, "Replay file path");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Per-iteration timing of the diffusion");
  c_bench->add_option("--manifest", bench.manifest, "Dataset manifest")->required();
  c_bench->add_option("--alpha", bench.alpha, "Mixing coefficient");
  c_bench->add_option("--p", bench.p, "Power-mean exponent");
  c_bench->add_option("--iters", bench.iters, "Iterations to time");
  c_bench->add_option("--train-ids", bench.train_ids, "Labeled node ids");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Explicit dataset repairs");
  c_pre->require_subcommand(1);
  auto* c_shift = c_pre->add_subcommand("shift-features", "Shift features to be nonnegative");
  c_shift->add_option("--manifest", pre.manifest, "Dataset manifest")->required();
  c_shift->add_option("--out-dir", pre.out_dir, "Output directory")->required();
  auto* c_loops = c_pre->add_subcommand("add-self-loops", "Give isolated nodes a self-loop");
  c_loops->add_option("--manifest", pre.manifest, "Dataset manifest")->required();
  c_loops->add_option("--out-dir", pre.out_dir, "Output directory")->required();

  std::string replay_file;
  auto* c_replay = app.add_subcommand("replay", "Re-run a command from its replay file");
  c_replay->add_option("file", replay_file, "Replay JSON")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what(), std::nullopt);
    return 2;
  }

  if (c_diffuse->parsed()) return run_diffuse(diffuse, common);
  if (c_train->parsed()) return run_train(train, common);
  if (c_cv->parsed()) return run_cv_command(cv, common);
  if (c_hls->parsed()) return run_hls(hls, common);
  if (c_demo->parsed()) return run_demo(demo, common);
  if (c_bench->parsed()) return run_bench(bench, common);
  if (c_shift->parsed()) return run_shift_features(pre, common);
  if (c_loops->parsed()) return run_add_self_loops(pre, common);
  if (c_replay->parsed()) {
    std::ifstream in(replay_file);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + replay_file);
    const json j = json::parse(in);
    auto argv = j.at("argv").get<std::vector<std::string>>();
    if (common.json_output) argv.insert(argv.begin(), "--json");
    return dispatch(std::move(argv));
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(std::move(args));
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what(), e.line());
    return 1;
  } catch (const json::exception& e) {
    print_error("ParseError", e.what(), std::nullopt);
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what(), std::nullopt);
    return 1;
  }
}
