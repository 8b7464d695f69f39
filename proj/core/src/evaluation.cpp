#include "fenplan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fenplan/csv.hpp"
#include "fenplan/error.hpp"
#include "fenplan/linalg.hpp"
#include "fenplan/rng.hpp"

namespace fenplan {

namespace {

Matrix standardize(const Matrix& x, std::span<const double> mean, std::span<const double> scale) {
  Matrix z(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto src = x.row(i);
    auto dst = z.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) dst[j] = (src[j] - mean[j]) * scale[j];
  }
  return z;
}

void add_row_vector(Matrix& m, std::span<const double> v) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += v[j];
  }
}

void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

struct Params {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

struct Activations {
  Matrix hidden;  // empty for the linear model
  Matrix logits;
};

Activations forward_pass(const Params& p, const Matrix& z) {
  Activations a;
  if (!p.w1.empty()) {
    a.hidden = matmul(z, p.w1);
    add_row_vector(a.hidden, p.b1);
    relu_inplace(a.hidden);
    a.logits = matmul(a.hidden, p.w2);
  } else {
    a.logits = matmul(z, p.w2);
  }
  add_row_vector(a.logits, p.b2);
  return a;
}

// Softmax probabilities in place; returns the summed cross-entropy.
double softmax_xent(Matrix& logits, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : r) v /= s;
    total -= std::log(std::max(r[static_cast<std::size_t>(labels[i])], std::numeric_limits<double>::min()));
  }
  return total;
}

double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

double objective(const Params& p, const Matrix& z, std::span<const int> labels, double l2) {
  Activations a = forward_pass(p, z);
  const double xent = softmax_xent(a.logits, labels) / static_cast<double>(z.rows());
  return xent + 0.5 * l2 * (squared_norm(p.w1) + squared_norm(p.w2));
}

void sgd_step(Params& p, const Matrix& z, std::span<const int> labels, double l2, double rate) {
  Activations a = forward_pass(p, z);
  softmax_xent(a.logits, labels);
  Matrix& d = a.logits;  // becomes dL/dlogits
  const double inv_b = 1.0 / static_cast<double>(z.rows());
  for (std::size_t i = 0; i < d.rows(); ++i) {
    d(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    for (double& v : d.row(i)) v *= inv_b;
  }

  const Matrix& input = p.w1.empty() ? z : a.hidden;
  const Matrix g2 = matmul_tn(input, d);
  Matrix d_hidden;
  if (!p.w1.empty()) {
    d_hidden = matmul(d, p.w2.transposed());
    for (std::size_t i = 0; i < d_hidden.rows(); ++i)
      for (std::size_t j = 0; j < d_hidden.cols(); ++j)
        if (a.hidden(i, j) <= 0.0) d_hidden(i, j) = 0.0;
  }

  auto w2 = p.w2.data();
  auto gw2 = g2.data();
  for (std::size_t k = 0; k < w2.size(); ++k) w2[k] -= rate * (gw2[k] + l2 * w2[k]);
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t k = 0; k < d.cols(); ++k) p.b2[k] -= rate * d(i, k);

  if (!p.w1.empty()) {
    const Matrix g1 = matmul_tn(z, d_hidden);
    auto w1 = p.w1.data();
    auto gw1 = g1.data();
    for (std::size_t k = 0; k < w1.size(); ++k) w1[k] -= rate * (gw1[k] + l2 * w1[k]);
    for (std::size_t i = 0; i < d_hidden.rows(); ++i)
      for (std::size_t h = 0; h < d_hidden.cols(); ++h) p.b1[h] -= rate * d_hidden(i, h);
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

Matrix ClassifierModel::logits(const Matrix& features) const {
  if (features.cols() != feature_mean.size()) {
    throw DimensionError("classifier expects " + std::to_string(feature_mean.size()) + " features, got " +
                         std::to_string(features.cols()));
  }
  Params p{hidden_weights, hidden_bias, weights, bias};
  return forward_pass(p, standardize(features, feature_mean, feature_scale)).logits;
}

std::vector<int> ClassifierModel::predict(const Matrix& features) const {
  const Matrix l = logits(features);
  std::vector<int> out(l.rows());
  for (std::size_t i = 0; i < l.rows(); ++i) {
    auto r = l.row(i);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

ClassifierModel train_classifier(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                 const ClassifierHyper& hyper) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  if (labels.size() != n) throw DimensionError("train_classifier: label count differs from row count");
  if (num_classes < 2) throw ConfigError("train_classifier: need at least two classes");
  if (n == 0) throw ConfigError("train_classifier: no training samples");
  if (hyper.batch == 0 || !(hyper.rate > 0.0)) throw ConfigError("train_classifier: batch and rate must be positive");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw ConfigError("train_classifier: label out of range");
  if (!features.all_finite()) throw NonFiniteError("train_classifier: features contain NaN or Inf");

  ClassifierModel model;
  model.feature_mean.assign(f, 0.0);
  model.feature_scale.assign(f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = features.row(i);
    for (std::size_t j = 0; j < f; ++j) model.feature_mean[j] += r[j];
  }
  for (double& m : model.feature_mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = features.row(i);
    for (std::size_t j = 0; j < f; ++j) {
      const double d = r[j] - model.feature_mean[j];
      model.feature_scale[j] += d * d;
    }
  }
  for (double& s : model.feature_scale) {
    const double sd = std::sqrt(s / static_cast<double>(n));
    s = sd > 1e-12 ? 1.0 / sd : 0.0;  // constant features carry no signal
  }
  const Matrix z = standardize(features, model.feature_mean, model.feature_scale);

  Params p;
  Rng init = Rng::stream(hyper.seed, "classifier/init");
  if (hyper.hidden > 0) {
    p.w1 = Matrix(f, hyper.hidden);
    const double sd = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(f, 1)));
    for (double& v : p.w1.data()) v = sd * init.normal();
    p.b1.assign(hyper.hidden, 0.0);
    p.w2 = Matrix(hyper.hidden, num_classes);
    for (double& v : p.w2.data()) v = 0.01 * init.normal();
  } else {
    p.w2 = Matrix(f, num_classes);
  }
  p.b2.assign(num_classes, 0.0);

  double rate = hyper.rate;
  double loss = objective(p, z, labels, hyper.l2);
  model.loss_history.push_back(loss);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle = Rng::stream(hyper.seed, "classifier/shuffle", epoch);
    shuffle.shuffle(order);
    Params trial = p;
    for (std::size_t start = 0; start < n; start += hyper.batch) {
      const std::size_t len = std::min(hyper.batch, n - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<int> batch_labels(len);
      for (std::size_t i = 0; i < len; ++i) batch_labels[i] = labels[idx[i]];
      sgd_step(trial, gather_rows(z, idx), batch_labels, hyper.l2, rate);
    }
    const double next = objective(trial, z, labels, hyper.l2);
    if (!std::isfinite(next)) {
      throw NumericError("train_classifier diverged at epoch " + std::to_string(epoch) + " (rate " +
                         format_number(rate) + ", last finite loss " + format_number(loss) + ")");
    }
    if (next > loss + hyper.monotone_tol) {
      rate *= hyper.backoff;
      ++model.rollbacks;
    } else {
      p = std::move(trial);
      loss = next;
    }
    model.loss_history.push_back(loss);
  }

  model.hidden_weights = std::move(p.w1);
  model.hidden_bias = std::move(p.b1);
  model.weights = std::move(p.w2);
  model.bias = std::move(p.b2);
  model.epochs = hyper.epochs;
  model.initial_rate = hyper.rate;
  model.final_rate = rate;
  model.seed = hyper.seed;
  model.final_loss = loss;
  return model;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw DimensionError("accuracy: prediction and label counts differ");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double utility(const ClassifierModel& model, const Matrix& features, std::span<const int> labels) {
  if (features.rows() != labels.size()) throw DimensionError("utility: row and label counts differ");
  return accuracy(model.predict(features), labels);
}

Matrix ReconstructorModel::predict(const Matrix& features) const {
  if (features.cols() != map.rows()) {
    throw DimensionError("reconstructor expects " + std::to_string(map.rows()) + " features, got " +
                         std::to_string(features.cols()));
  }
  Matrix out = matmul(features, map);
  add_row_vector(out, intercept);
  return out;
}

ReconstructorModel fit_reconstructor(const Matrix& features, const Matrix& images, double lambda) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  const std::size_t p = images.cols();
  if (n == 0) throw ConfigError("fit_reconstructor: no samples");
  if (images.rows() != n) throw DimensionError("fit_reconstructor: feature and image row counts differ");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("fit_reconstructor: lambda must be >= 0");
  if (!features.all_finite() || !images.all_finite()) throw NonFiniteError("fit_reconstructor: non-finite input");

  std::vector<double> xm(f, 0.0), ym(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto xr = features.row(i);
    auto yr = images.row(i);
    for (std::size_t j = 0; j < f; ++j) xm[j] += xr[j];
    for (std::size_t j = 0; j < p; ++j) ym[j] += yr[j];
  }
  for (double& v : xm) v /= static_cast<double>(n);
  for (double& v : ym) v /= static_cast<double>(n);
  Matrix xc(n, f), yc(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) xc(i, j) = features(i, j) - xm[j];
    for (std::size_t j = 0; j < p; ++j) yc(i, j) = images(i, j) - ym[j];
  }

  ReconstructorModel model;
  model.lambda = lambda;
  try {
    if (lambda > 0.0 && f > n) {
      // Dual form: G = Xc^T (Xc Xc^T + lambda I)^-1 Yc.
      Matrix gram = matmul(xc, xc.transposed());
      for (std::size_t i = 0; i < n; ++i) gram(i, i) += lambda;
      model.map = matmul_tn(xc, solve_spd(gram, yc));
    } else {
      Matrix gram = matmul_tn(xc, xc);
      for (std::size_t i = 0; i < f; ++i) gram(i, i) += lambda;
      model.map = solve_spd(gram, matmul_tn(xc, yc));
    }
  } catch (const NumericError& e) {
    throw NumericError(std::string("fit_reconstructor: singular normal equations (") + e.what() +
                       "); use lambda > 0");
  }

  model.intercept = ym;
  for (std::size_t j = 0; j < f; ++j) {
    auto gr = model.map.row(j);
    for (std::size_t k = 0; k < p; ++k) model.intercept[k] -= xm[j] * gr[k];
  }
  const Matrix fitted = model.predict(features);
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < p; ++k) {
      const double d = fitted(i, k) - images(i, k);
      rss += d * d;
    }
  model.fit_residual = rss;
  return model;
}

double psnr_from_mse(double mse, const PsnrOptions& opts) {
  if (!(opts.peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  if (!(mse >= 0.0)) throw ConfigError("psnr: MSE must be >= 0");
  if (mse == 0.0) return opts.cap_db;
  return std::min(opts.cap_db, 10.0 * std::log10(opts.peak * opts.peak / mse));
}

std::vector<double> psnr(const FeatureTensor& reconstructed, const FeatureTensor& original, const PsnrOptions& opts) {
  if (!(reconstructed.shape() == original.shape())) throw DimensionError("psnr: image shapes differ");
  if (!(opts.peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  const std::size_t per = original.shape().sample_size();
  std::vector<double> out(original.n());
  for (std::size_t i = 0; i < original.n(); ++i) {
    auto r = reconstructed.sample(i);
    auto o = original.sample(i);
    double se = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      const double d = std::clamp(r[k], 0.0, opts.peak) - o[k];
      se += d * d;
    }
    out[i] = psnr_from_mse(per == 0 ? 0.0 : se / static_cast<double>(per), opts);
  }
  return out;
}

EvalResult evaluate_representations(const FeatureTensor& train_reps, const FeatureTensor& test_reps,
                                    const LabeledDataset& data, const EvalHyper& hyper) {
  if (train_reps.n() != data.train.size() || test_reps.n() != data.test.size()) {
    throw DimensionError("evaluate: representation counts differ from the dataset splits");
  }
  if (data.test.size() == 0) throw ConfigError("evaluate: empty test split");
  const Matrix x_train = flatten_samples(train_reps);
  const Matrix x_test = flatten_samples(test_reps);

  EvalResult result;
  const ClassifierModel clf = train_classifier(x_train, data.train.labels, data.num_classes, hyper.classifier);
  result.utility = utility(clf, x_test, data.test.labels);

  double centered_ss = 0.0;
  for (std::size_t j = 0; j < x_train.cols(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x_train.rows(); ++i) m += x_train(i, j);
    m /= static_cast<double>(x_train.rows());
    for (std::size_t i = 0; i < x_train.rows(); ++i) centered_ss += (x_train(i, j) - m) * (x_train(i, j) - m);
  }
  const double lambda =
      std::max(hyper.recon_lambda_rel * centered_ss / static_cast<double>(std::max<std::size_t>(x_train.cols(), 1)),
               1e-10);
  const ReconstructorModel rec = fit_reconstructor(x_train, flatten_samples(data.train.images), lambda);
  const Matrix guess = rec.predict(x_test);
  const FeatureTensor recon(data.test.images.shape(), std::vector<double>(guess.data().begin(), guess.data().end()));
  const auto scores = psnr(recon, data.test.images, hyper.psnr);
  result.privacy = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  return result;
}

EvalResult evaluate_fen(const Fen& fen, const LabeledDataset& data, const EvalHyper& hyper) {
  return evaluate_representations(fen.forward(data.train.images), fen.forward(data.test.images), data, hyper);
}

}  // namespace fenplan
