#include "hyperdiff/io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hyperdiff/error.hpp"

namespace hyperdiff {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

bool skip_line(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

// Splits on any of `seps`, dropping empty tokens.
std::vector<std::string_view> tokens(std::string_view line, std::string_view seps) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && seps.find(line[i]) != std::string_view::npos) ++i;
    std::size_t j = i;
    while (j < line.size() && seps.find(line[j]) == std::string_view::npos) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t parse_index(std::string_view tok, std::size_t line_no, const fs::path& path) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorKind::ParseError,
                path.string() + ":" + std::to_string(line_no) + ": bad integer '" +
                    std::string(tok) + "'",
                line_no);
  }
  return v;
}

double parse_real(std::string_view tok, std::size_t line_no, const fs::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorKind::ParseError,
                path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                    std::string(tok) + "'",
                line_no);
  }
  return v;
}

constexpr std::string_view kWhitespace = " \t\r";

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::vector<std::vector<std::size_t>> read_hyperedges(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<std::size_t>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    std::vector<std::size_t> e;
    for (auto tok : tokens(line, kWhitespace)) e.push_back(parse_index(tok, line_no, path));
    edges.push_back(std::move(e));
  }
  return edges;
}

std::vector<double> read_weights(const fs::path& path) {
  auto in = open_in(path);
  std::vector<double> w;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto toks = tokens(line, kWhitespace);
    if (toks.size() != 1) {
      throw Error(ErrorKind::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": expected one weight", line_no);
    }
    w.push_back(parse_real(toks[0], line_no, path));
  }
  return w;
}

void write_hypergraph(const Hypergraph& h, const fs::path& edges_path,
                      const std::optional<fs::path>& weights_path) {
  auto out = open_out(edges_path);
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    const auto members = h.members(e);
    for (std::size_t k = 0; k < members.size(); ++k) out << (k ? " " : "") << members[k];
    out << '\n';
  }
  if (weights_path) {
    auto wout = open_out(*weights_path);
    for (double w : h.weights()) wout << format_double(w) << '\n';
  }
}

DenseMatrix read_features(const fs::path& path, FeatureFormat format, std::size_t rows,
                          std::size_t cols) {
  auto in = open_in(path);
  DenseMatrix x(rows, cols);
  std::string line;
  std::size_t line_no = 0;
  if (format == FeatureFormat::DenseCsv) {
    std::size_t r = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (skip_line(line)) continue;
      const auto toks = tokens(line, ", \t\r");
      if (r >= rows || toks.size() != cols) {
        throw Error(ErrorKind::DimensionMismatch,
                    path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(rows) + " rows of " + std::to_string(cols) + " values",
                    line_no);
      }
      for (std::size_t j = 0; j < cols; ++j) x(r, j) = parse_real(toks[j], line_no, path);
      ++r;
    }
    if (r != rows) {
      throw Error(ErrorKind::DimensionMismatch, path.string() + ": found " + std::to_string(r) +
                                                    " feature rows, expected " +
                                                    std::to_string(rows));
    }
    return x;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto toks = tokens(line, kWhitespace);
    if (toks.size() != 3) {
      throw Error(ErrorKind::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": expected 'row col value'",
                  line_no);
    }
    const std::size_t r = parse_index(toks[0], line_no, path);
    const std::size_t c = parse_index(toks[1], line_no, path);
    if (r >= rows || c >= cols) {
      throw Error(ErrorKind::DimensionMismatch,
                  path.string() + ":" + std::to_string(line_no) + ": entry outside declared shape",
                  line_no);
    }
    x(r, c) = parse_real(toks[2], line_no, path);
  }
  return x;
}

void write_features_csv(const DenseMatrix& x, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
    out << '\n';
  }
}

std::vector<std::size_t> read_labels(const fs::path& path, std::size_t num_nodes) {
  auto in = open_in(path);
  std::vector<std::size_t> labels(num_nodes, 0);
  std::vector<bool> seen(num_nodes, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto toks = tokens(line, kWhitespace);
    if (toks.size() != 2) {
      throw Error(ErrorKind::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": expected 'node_id class_id'",
                  line_no);
    }
    const std::size_t node = parse_index(toks[0], line_no, path);
    const std::size_t cls = parse_index(toks[1], line_no, path);
    if (node >= num_nodes) {
      throw Error(ErrorKind::DimensionMismatch,
                  path.string() + ":" + std::to_string(line_no) + ": node id out of range", line_no);
    }
    labels[node] = cls;
    seen[node] = true;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (!seen[i]) {
      throw Error(ErrorKind::DimensionMismatch,
                  path.string() + ": node " + std::to_string(i) + " has no label", std::nullopt, i);
    }
  }
  return labels;
}

std::vector<std::size_t> read_id_list(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::size_t> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    for (auto tok : tokens(line, kWhitespace)) ids.push_back(parse_index(tok, line_no, path));
  }
  return ids;
}

void write_id_list(const std::vector<std::size_t>& ids, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t id : ids) out << id << '\n';
}

// ---------------------------------------------------------------- manifest

DatasetManifest read_manifest(const fs::path& path) {
  auto in = open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  DatasetManifest m;
  try {
    m.name = j.value("name", path.stem().string());
    m.hyperedges_path = resolve(j.at("hyperedges").get<std::string>());
    m.labels_path = resolve(j.at("labels").get<std::string>());
    if (j.contains("weights") && !j["weights"].is_null()) m.weights_path = resolve(j["weights"]);
    if (j.contains("features") && !j["features"].is_null()) m.features_path = resolve(j["features"]);
    if (j.contains("train_ids") && !j["train_ids"].is_null()) m.train_ids_path = resolve(j["train_ids"]);
    const std::string fmt = j.value("features_format", "dense");
    if (fmt == "dense") {
      m.features_format = FeatureFormat::DenseCsv;
    } else if (fmt == "triples") {
      m.features_format = FeatureFormat::Triples;
    } else {
      throw Error(ErrorKind::ParseError, "unknown features_format '" + fmt + "'");
    }
    m.self_loops = j.value("self_loops", false);
    m.n = j.at("n").get<std::size_t>();
    m.m = j.at("m").get<std::size_t>();
    m.d = j.value("d", std::size_t{0});
    m.c = j.at("c").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return fs::relative(p, base.empty() ? "." : base).string(); };
  nlohmann::json j;
  j["name"] = m.name;
  j["hyperedges"] = rel(m.hyperedges_path);
  j["labels"] = rel(m.labels_path);
  if (m.weights_path) j["weights"] = rel(*m.weights_path);
  if (m.features_path) {
    j["features"] = rel(*m.features_path);
    j["features_format"] = m.features_format == FeatureFormat::DenseCsv ? "dense" : "triples";
  }
  if (m.train_ids_path) j["train_ids"] = rel(*m.train_ids_path);
  if (m.self_loops) j["self_loops"] = true;
  j["n"] = m.n;
  j["m"] = m.m;
  j["d"] = m.d;
  j["c"] = m.c;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& manifest_path) {
  DatasetManifest m = read_manifest(manifest_path);
  const auto edges = read_hyperedges(m.hyperedges_path);
  const std::vector<double> weights = m.weights_path ? read_weights(*m.weights_path) : std::vector<double>{};
  if (edges.size() != m.m) {
    throw Error(ErrorKind::DimensionMismatch, m.name + ": manifest declares m = " + std::to_string(m.m) +
                                                  ", found " + std::to_string(edges.size()) +
                                                  " hyperedges");
  }
  for (const auto& e : edges)
    for (std::size_t v : e)
      if (v >= m.n) {
        throw Error(ErrorKind::DimensionMismatch,
                    m.name + ": node id " + std::to_string(v) + " >= declared n = " + std::to_string(m.n));
      }
  BuildOptions opts;
  opts.num_nodes = m.n;
  opts.allow_singletons = m.self_loops;
  Hypergraph h = build_hypergraph(edges, weights, opts);

  std::optional<DenseMatrix> features;
  if (m.features_path) {
    features = read_features(*m.features_path, m.features_format, m.n, m.d);
  } else if (m.d != 0) {
    throw Error(ErrorKind::DimensionMismatch, m.name + ": d > 0 but no features file");
  }
  auto labels = read_labels(m.labels_path, m.n);
  std::size_t max_class = 0;
  for (std::size_t c : labels) max_class = std::max(max_class, c);
  if (m.n > 0 && max_class + 1 != m.c) {
    throw Error(ErrorKind::DimensionMismatch, m.name + ": manifest declares c = " + std::to_string(m.c) +
                                                  ", labels use " + std::to_string(max_class + 1) +
                                                  " classes");
  }
  return Dataset{std::move(m), std::move(h), std::move(features), std::move(labels)};
}

// ---------------------------------------------------------------- embeddings

namespace {

constexpr char kMagic[8] = {'H', 'D', 'I', 'F', 'E', 'M', 'B', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}
std::uint64_t get_u(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), bytes);
  if (!in) throw Error(ErrorKind::ParseError, "embedding file truncated");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void write_embedding(const EmbeddingMatrix& f, std::ostream& out) {
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, 0);
  put_u64(out, f.rows());
  put_u64(out, f.cols());
  put_u64(out, f.label_cols());
  put_u64(out, f.feature_cols());
  for (double v : f.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
  }
}

EmbeddingMatrix read_embedding(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::ParseError, "not an embedding file (bad magic)");
  }
  const auto version = get_u(in, 4);
  if (version != kVersion) {
    throw Error(ErrorKind::ParseError, "unsupported embedding version " + std::to_string(version));
  }
  (void)get_u(in, 4);
  const auto rows = get_u(in, 8);
  const auto cols = get_u(in, 8);
  const auto label_cols = get_u(in, 8);
  const auto feature_cols = get_u(in, 8);
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    const std::uint64_t bits = get_u(in, 8);
    std::memcpy(&v, &bits, sizeof v);
  }
  EmbeddingMatrix f(rows, cols, std::move(data));
  f.set_blocks(label_cols, feature_cols);
  return f;
}

void save_embedding(const EmbeddingMatrix& f, const fs::path& path) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_embedding(f, out);
}

EmbeddingMatrix load_embedding(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_embedding(in);
}

void write_diagnostics_csv(const DiffusionResult& r, const fs::path& path) {
  auto out = open_out(path);
  out << "iter,residual,phi,elapsed_ms\n";
  for (std::size_t k = 0; k < r.residual_history.size(); ++k) {
    out << (k + 1) << ',' << format_double(r.residual_history[k]) << ',';
    if (k < r.phi_history.size()) out << format_double(r.phi_history[k]);
    out << ',';
    if (k < r.elapsed_ms.size()) out << format_double(r.elapsed_ms[k]);
    out << '\n';
  }
}

// ---------------------------------------------------------------- model

void save_model(const SoftmaxModel& model, const fs::path& path) {
  auto out = open_out(path);
  const std::size_t k = model.input_dim();
  out << "hyperdiff-softmax,1," << k << ',' << model.classes << '\n';
  out << "mean";
  for (double v : model.column_mean) out << ',' << format_double(v);
  out << "\nscale";
  for (double v : model.column_scale) out << ',' << format_double(v);
  out << '\n';
  for (std::size_t a = 0; a < model.theta.rows(); ++a) {
    for (std::size_t j = 0; j < model.theta.cols(); ++j)
      out << (j ? "," : "") << format_double(model.theta(a, j));
    out << '\n';
  }
}

SoftmaxModel load_model(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 1;
  auto next = [&]() {
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": truncated", line_no);
    return tokens(line, ",\r");
  };
  auto header = next();
  if (header.size() != 4 || header[0] != "hyperdiff-softmax" || header[1] != "1") {
    throw Error(ErrorKind::ParseError, path.string() + ": bad model header", 1);
  }
  SoftmaxModel model;
  const std::size_t k = parse_index(header[2], 1, path);
  model.classes = parse_index(header[3], 1, path);
  auto read_vec = [&](std::string_view tag) {
    ++line_no;
    auto toks = next();
    if (toks.empty() || toks[0] != tag || toks.size() != k + 1) {
      throw Error(ErrorKind::ParseError, path.string() + ": bad '" + std::string(tag) + "' row", line_no);
    }
    std::vector<double> v(k);
    for (std::size_t j = 0; j < k; ++j) v[j] = parse_real(toks[j + 1], line_no, path);
    return v;
  };
  model.column_mean = read_vec("mean");
  model.column_scale = read_vec("scale");
  model.theta = DenseMatrix(k + 1, model.classes);
  for (std::size_t a = 0; a <= k; ++a) {
    ++line_no;
    auto toks = next();
    if (toks.size() != model.classes) {
      throw Error(ErrorKind::ParseError, path.string() + ": bad theta row", line_no);
    }
    for (std::size_t j = 0; j < model.classes; ++j) model.theta(a, j) = parse_real(toks[j], line_no, path);
  }
  return model;
}

}  // namespace hyperdiff
