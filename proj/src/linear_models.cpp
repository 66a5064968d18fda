#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "model_internals.hpp"
#include "poisonbench/errors.hpp"
#include "poisonbench/models.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::models {

double LinearClassifier::margin(std::span<const double> x) const {
  double m = bias_;
  for (std::size_t j = 0; j < weights_.size(); ++j) m += weights_[j] * x[j];
  return m;
}

double LinearClassifier::score_one(std::span<const double> x) const {
  return sigmoid(margin(x));
}

nlohmann::json LinearClassifier::params_to_json() const {
  return {{"weights", weights_}, {"bias", bias_}};
}

std::shared_ptr<LinearClassifier> LinearClassifier::from_params_json(const nlohmann::json& j) {
  return std::make_shared<LinearClassifier>(j.at("weights").get<std::vector<double>>(),
                                            j.at("bias").get<double>());
}

namespace internal {

namespace {

bool all_finite(const std::vector<double>& w, double b) {
  if (!std::isfinite(b)) return false;
  for (double v : w) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const std::vector<double>& w, double b, const char* family) {
  if (!all_finite(w, b)) {
    throw NonFiniteLossError(
        fmt::format("{}: parameters diverged; lower the learning rate", family));
  }
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

}  // namespace

LinearClassifier train_sgd_hinge(const SgdLinearParams& params, std::uint64_t seed,
                                 const Matrix& x, const std::vector<int>& labels) {
  const std::size_t n = x.rows();
  std::vector<double> w(x.cols(), 0.0);
  double b = 0.0;

  Rng rng(seed);
  auto order = identity_order(n);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (auto r : order) {
      const auto xi = x.row(r);
      const double y = malware_sign(labels[r]);
      double m = b;
      for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * xi[j];
      // L2 shrinkage applies every step; the hinge part only on violations.
      const double keep = 1.0 - params.learning_rate * params.l2;
      for (auto& wj : w) wj *= keep;
      if (y * m < 1.0) {
        for (std::size_t j = 0; j < w.size(); ++j) {
          w[j] += params.learning_rate * y * xi[j];
        }
        b += params.learning_rate * y;
      }
    }
    require_finite(w, b, "sgd");
  }
  return LinearClassifier(std::move(w), b);
}

LinearClassifier train_logreg(const LogisticRegressionParams& params, const Matrix& x,
                              const std::vector<int>& labels) {
  std::vector<double> w(x.cols(), 0.0);
  double b = 0.0;
  std::vector<double> grad_w(x.cols(), 0.0);
  double grad_b = 0.0;

  for (int it = 0; it < params.iterations; ++it) {
    logreg_gradients(w, b, x, labels, params.l2, grad_w, grad_b);
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] -= params.learning_rate * grad_w[j];
    }
    b -= params.learning_rate * grad_b;
    require_finite(w, b, "logreg");
  }
  return LinearClassifier(std::move(w), b);
}

LinearClassifier train_svm_pegasos(const LinearSvmParams& params, std::uint64_t seed,
                                   const Matrix& x, const std::vector<int>& labels) {
  const std::size_t n = x.rows();
  std::vector<double> w(x.cols(), 0.0);
  double b = 0.0;
  const double radius = 1.0 / std::sqrt(params.lambda);

  Rng rng(seed);
  auto order = identity_order(n);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (auto r : order) {
      ++t;
      const double eta = 1.0 / (params.lambda * static_cast<double>(t));
      const auto xi = x.row(r);
      const double y = malware_sign(labels[r]);
      double m = b;
      for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * xi[j];

      // Bias folded into the regularized block: both shrink by (1 - 1/t),
      // which keeps the early huge steps from parking the intercept.
      const double keep = 1.0 - eta * params.lambda;
      for (auto& wj : w) wj *= keep;
      b *= keep;
      if (y * m < 1.0) {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += eta * y * xi[j];
        b += eta * y;
      }

      double norm_sq = b * b;
      for (double wj : w) norm_sq += wj * wj;
      if (norm_sq > radius * radius) {
        const double scale = radius / std::sqrt(norm_sq);
        for (auto& wj : w) wj *= scale;
        b *= scale;
      }
    }
    require_finite(w, b, "svm");
  }
  return LinearClassifier(std::move(w), b);
}

LinearClassifier train_perceptron(const PerceptronParams& params, std::uint64_t seed,
                                  const Matrix& x, const std::vector<int>& labels) {
  const std::size_t n = x.rows();
  std::vector<double> w(x.cols(), 0.0);
  double b = 0.0;

  Rng rng(seed);
  auto order = identity_order(n);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (auto r : order) {
      const auto xi = x.row(r);
      const double y = malware_sign(labels[r]);
      double m = b;
      for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * xi[j];
      // A zero margin counts as a mistake, matching the update rule's view
      // that sign(0) decides nothing.
      if (y * m <= 0.0) {
        for (std::size_t j = 0; j < w.size(); ++j) {
          w[j] += params.learning_rate * y * xi[j];
        }
        b += params.learning_rate * y;
      }
    }
    require_finite(w, b, "perceptron");
  }
  return LinearClassifier(std::move(w), b);
}

double logreg_loss(std::span<const double> w, double b, const Matrix& x,
                   const std::vector<int>& labels, double l2) {
  const std::size_t n = x.rows();
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto xi = x.row(r);
    double m = b;
    for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * xi[j];
    const double p = clamp_probability(sigmoid(m));
    const double z = malware_target(labels[r]);
    loss -= z * std::log(p) + (1.0 - z) * std::log(1.0 - p);
  }
  loss /= static_cast<double>(n);
  double penalty = 0.0;
  for (double wj : w) penalty += wj * wj;
  return loss + 0.5 * l2 * penalty;
}

void logreg_gradients(std::span<const double> w, double b, const Matrix& x,
                      const std::vector<int>& labels, double l2,
                      std::vector<double>& grad_w, double& grad_b) {
  const std::size_t n = x.rows();
  grad_w.assign(w.size(), 0.0);
  grad_b = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto xi = x.row(r);
    double m = b;
    for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * xi[j];
    const double delta = sigmoid(m) - malware_target(labels[r]);
    for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] += delta * xi[j];
    grad_b += delta;
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    grad_w[j] = grad_w[j] / static_cast<double>(n) + l2 * w[j];
  }
  grad_b /= static_cast<double>(n);
}

}  // namespace internal
}  // namespace poisonbench::models
