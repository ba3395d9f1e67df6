#include "hyperdiff/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hyperdiff/error.hpp"

namespace hyperdiff {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::ConfigError, "learning_rate must be positive");
  if (epochs < 1) throw Error(ErrorKind::ConfigError, "epochs must be at least 1");
  if (!(l2 >= 0.0)) throw Error(ErrorKind::ConfigError, "l2 must be nonnegative");
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto row = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      row[j] = std::exp(in[j] - mx);
      s += row[j];
    }
    for (double& v : row) v /= s;
  }
  return out;
}

double softmax_objective(const DenseMatrix& x, std::span<const std::size_t> labels,
                         std::span<const std::size_t> rows, const DenseMatrix& theta, double l2,
                         DenseMatrix* grad) {
  const std::size_t dim = theta.rows();
  const std::size_t c = theta.cols();
  if (x.cols() != dim) throw Error(ErrorKind::ShapeMismatch, "objective: x and theta disagree");
  if (grad) *grad = DenseMatrix(dim, c);

  std::vector<double> logits(c);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    const auto xr = x.row(r);
    std::fill(logits.begin(), logits.end(), 0.0);
    for (std::size_t a = 0; a < dim; ++a) {
      const double xa = xr[a];
      if (xa == 0.0) continue;
      const auto th = theta.row(a);
      for (std::size_t j = 0; j < c; ++j) logits[j] += xa * th[j];
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double& v : logits) {
      v = std::exp(v - mx);
      s += v;
    }
    const std::size_t y = labels[r];
    loss -= std::log(logits[y] / s);
    if (grad) {
      for (std::size_t j = 0; j < c; ++j) {
        const double coef = (logits[j] / s - (j == y ? 1.0 : 0.0)) * inv_n;
        for (std::size_t a = 0; a < dim; ++a) (*grad)(a, j) += coef * xr[a];
      }
    }
  }
  loss *= inv_n;

  double sq = 0.0;
  for (double t : theta.values()) sq += t * t;
  loss += 0.5 * l2 * sq;
  if (grad && l2 > 0.0) {
    auto gv = grad->values();
    auto tv = theta.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += l2 * tv[i];
  }
  return loss;
}

namespace {

void column_statistics(const EmbeddingMatrix& f, bool standardize, std::vector<double>& mean,
                       std::vector<double>& scale) {
  const std::size_t k = f.cols();
  mean.assign(k, 0.0);
  scale.assign(k, 1.0);
  if (!standardize || f.rows() == 0) return;
  const double inv_n = 1.0 / static_cast<double>(f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) mean[j] += f(i, j);
  for (double& m : mean) m *= inv_n;
  std::vector<double> var(k, 0.0);
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double d = f(i, j) - mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < k; ++j) {
    const double sd = std::sqrt(var[j] * inv_n);
    // Constant columns keep unit scale.
    scale[j] = sd > 1e-12 * std::max(std::abs(mean[j]), 1e-300) ? sd : 1.0;
  }
}

DenseMatrix augmented_rows(const EmbeddingMatrix& f, std::span<const std::size_t> ids,
                           const std::vector<double>& mean, const std::vector<double>& scale) {
  const std::size_t k = f.cols();
  DenseMatrix x(ids.size(), k + 1);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto src = f.row(ids[r]);
    auto dst = x.row(r);
    for (std::size_t j = 0; j < k; ++j) dst[j] = (src[j] - mean[j]) / scale[j];
    dst[k] = 1.0;
  }
  return x;
}

}  // namespace

SoftmaxModel train_softmax(const EmbeddingMatrix& f, std::span<const std::size_t> labels,
                           std::span<const std::size_t> train_ids, std::size_t classes,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (train_ids.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no training nodes");
  if (classes < 1) throw Error(ErrorKind::ClassOutOfRange, "need at least one class");
  if (labels.size() < f.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "label vector shorter than embedding row count");
  }
  std::vector<std::size_t> y(train_ids.size());
  for (std::size_t r = 0; r < train_ids.size(); ++r) {
    const std::size_t id = train_ids[r];
    if (id >= f.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "training node " + std::to_string(id) + " out of range",
                  std::nullopt, id);
    }
    if (labels[id] >= classes) {
      throw Error(ErrorKind::ClassOutOfRange,
                  "node " + std::to_string(id) + " has class " + std::to_string(labels[id]) +
                      " (classes = " + std::to_string(classes) + ")",
                  std::nullopt, id);
    }
    y[r] = labels[id];
  }

  SoftmaxModel model;
  model.classes = classes;
  column_statistics(f, cfg.standardize, model.column_mean, model.column_scale);
  const DenseMatrix x = augmented_rows(f, train_ids, model.column_mean, model.column_scale);

  model.theta = DenseMatrix(f.cols() + 1, classes);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  for (double& t : model.theta.values()) t = init(rng);

  std::vector<std::size_t> rows(y.size());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;

  DenseMatrix grad;
  DenseMatrix candidate;
  double step = cfg.learning_rate;
  double loss = softmax_objective(x, y, rows, model.theta, cfg.l2, &grad);
  model.loss_history.push_back(loss);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fixed step, halved only when it would raise the objective.
    double next_loss = loss;
    for (int attempt = 0; attempt < 60; ++attempt) {
      candidate = model.theta;
      auto cv = candidate.values();
      auto gv = grad.values();
      for (std::size_t i = 0; i < cv.size(); ++i) cv[i] -= step * gv[i];
      next_loss = softmax_objective(x, y, rows, candidate, cfg.l2, nullptr);
      if (next_loss <= loss) break;
      step *= 0.5;
    }
    if (next_loss > loss) {
      model.loss_history.push_back(loss);
      continue;
    }
    model.theta = std::move(candidate);
    loss = softmax_objective(x, y, rows, model.theta, cfg.l2, &grad);
    model.loss_history.push_back(loss);
  }
  return model;
}

Prediction predict(const SoftmaxModel& model, const EmbeddingMatrix& f) {
  if (f.cols() != model.input_dim() || model.theta.rows() != f.cols() + 1) {
    throw Error(ErrorKind::ShapeMismatch, "embedding has " + std::to_string(f.cols()) +
                                              " columns, model expects " +
                                              std::to_string(model.input_dim()));
  }
  const std::size_t k = f.cols();
  const std::size_t c = model.theta.cols();
  DenseMatrix logits(f.rows(), c);
  std::vector<double> z(k);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    const auto src = f.row(i);
    for (std::size_t a = 0; a < k; ++a) z[a] = (src[a] - model.column_mean[a]) / model.column_scale[a];
    auto out = logits.row(i);
    for (std::size_t a = 0; a < k; ++a) {
      const auto th = model.theta.row(a);
      for (std::size_t j = 0; j < c; ++j) out[j] += z[a] * th[j];
    }
    const auto bias = model.theta.row(k);
    for (std::size_t j = 0; j < c; ++j) out[j] += bias[j];
  }
  Prediction p;
  p.probabilities = softmax_rows(logits);
  p.classes.resize(f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    p.classes[i] = best;
  }
  return p;
}

double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                std::span<const std::size_t> eval_ids) {
  if (eval_ids.empty()) throw Error(ErrorKind::EmptyEvalSet, "no evaluation nodes");
  std::size_t correct = 0;
  for (std::size_t id : eval_ids) {
    if (id >= pred.size() || id >= truth.size()) {
      throw Error(ErrorKind::ShapeMismatch, "evaluation node out of range", std::nullopt, id);
    }
    if (pred[id] == truth[id]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eval_ids.size());
}

}  // namespace hyperdiff
