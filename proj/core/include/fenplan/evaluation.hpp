#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fenplan/dataset.hpp"
#include "fenplan/fen.hpp"
#include "fenplan/tensor.hpp"

namespace fenplan {

// Cloud-side classifier stand-in: multinomial logistic regression (optionally
// one relu hidden layer) trained by seeded mini-batch gradient descent on
// standardized features.
//
// After every epoch the full-training-set objective is measured; an epoch
// that raises it by more than `monotone_tol` is rolled back and the rate is
// multiplied by `backoff`. The recorded loss history is therefore
// non-increasing.
struct ClassifierHyper {
  std::size_t epochs = 60;
  double rate = 0.5;
  std::size_t batch = 32;
  std::size_t hidden = 0;  // 0 = linear softmax
  double l2 = 1e-4;
  double backoff = 0.5;
  double monotone_tol = 1e-9;
  std::uint64_t seed = 0;
};

struct ClassifierModel {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;  // multiplies (x - mean)
  Matrix hidden_weights;              // F x H, empty when linear
  std::vector<double> hidden_bias;
  Matrix weights;                     // (F or H) x K
  std::vector<double> bias;           // K

  // Training metadata.
  std::size_t epochs = 0;
  double initial_rate = 0.0;
  double final_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t rollbacks = 0;
  std::vector<double> loss_history;  // [0] is the loss before training
  double final_loss = 0.0;

  std::size_t num_classes() const noexcept { return bias.size(); }
  Matrix logits(const Matrix& features) const;
  // Argmax of the logits; ties go to the lowest class index.
  std::vector<int> predict(const Matrix& features) const;
};

// features: N x F. Throws ConfigError for fewer than two classes and
// NumericError if the loss becomes NaN/Inf.
ClassifierModel train_classifier(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                 const ClassifierHyper& hyper);

double accuracy(std::span<const int> predicted, std::span<const int> labels);
// Fraction of rows whose predicted class matches the label.
double utility(const ClassifierModel& model, const Matrix& features, std::span<const int> labels);

// Adversary stand-in: linear map with intercept from representations to
// pixels, fit in closed form by ridge regression,
//   min  sum_i ||G^T z_i + b - x_i||^2 + lambda ||G||_F^2.
struct ReconstructorModel {
  Matrix map;                     // F x P
  std::vector<double> intercept;  // P
  double lambda = 0.0;
  double fit_residual = 0.0;      // training sum of squared errors

  Matrix predict(const Matrix& features) const;
};

// Throws NumericError when lambda = 0 and the normal equations are singular.
ReconstructorModel fit_reconstructor(const Matrix& features, const Matrix& images, double lambda);

struct PsnrOptions {
  double peak = 1.0;
  double cap_db = 60.0;  // reported for zero MSE, and the ceiling in general
};

double psnr_from_mse(double mse, const PsnrOptions& opts = {});

// Per-image PSNR after clamping `reconstructed` to [0, peak].
std::vector<double> psnr(const FeatureTensor& reconstructed, const FeatureTensor& original,
                         const PsnrOptions& opts = {});

struct EvalHyper {
  ClassifierHyper classifier;
  // Reconstructor ridge = recon_lambda_rel * mean diagonal of the centered
  // Gram matrix (absolute floor 1e-10).
  double recon_lambda_rel = 1e-3;
  PsnrOptions psnr;
};

struct EvalResult {
  double utility = 0.0;  // test accuracy
  double privacy = 0.0;  // mean test PSNR in dB

  bool operator==(const EvalResult&) const = default;
};

// Trains classifier and reconstructor on the train representations, scores
// on the test representations.
EvalResult evaluate_representations(const FeatureTensor& train_reps, const FeatureTensor& test_reps,
                                    const LabeledDataset& data, const EvalHyper& hyper);

// Runs the FEN over both splits, then evaluate_representations.
EvalResult evaluate_fen(const Fen& fen, const LabeledDataset& data, const EvalHyper& hyper);

}  // namespace fenplan
