#pragma once

// Training-side helpers shared between the model trainers, the gradient
// checker, and the forest builder. Not part of the public API.

#include <cmath>
#include <span>
#include <vector>

#include "poisonbench/matrix.hpp"
#include "poisonbench/models.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::models::internal {

// Cross-entropy targets and hinge signs under the malware-positive
// convention: label 0 is the class the margin points toward.
inline double malware_target(int label) { return label == 0 ? 1.0 : 0.0; }
inline double malware_sign(int label) { return label == 0 ? 1.0 : -1.0; }

// Probability clamp applied before logs so cross-entropy never sees 0 or 1.
inline double clamp_probability(double p) {
  if (p < 1e-12) return 1e-12;
  if (p > 1.0 - 1e-12) return 1.0 - 1e-12;
  return p;
}

struct TreeTrainOptions {
  DecisionTreeParams params{};
  int max_features = 0;      // 0 = consider every feature at every split
  Rng* feature_rng = nullptr;  // split-time feature sampling stream (forest)
};

std::vector<DecisionTreeClassifier::Node> grow_tree(const Matrix& x,
                                                    const std::vector<int>& labels,
                                                    std::vector<std::size_t> rows,
                                                    const TreeTrainOptions& options);

RandomForestClassifier train_forest(const RandomForestParams& params, std::uint64_t seed,
                                    const Matrix& x, const std::vector<int>& labels);

LinearClassifier train_sgd_hinge(const SgdLinearParams& params, std::uint64_t seed,
                                 const Matrix& x, const std::vector<int>& labels);
LinearClassifier train_logreg(const LogisticRegressionParams& params, const Matrix& x,
                              const std::vector<int>& labels);
LinearClassifier train_svm_pegasos(const LinearSvmParams& params, std::uint64_t seed,
                                   const Matrix& x, const std::vector<int>& labels);
LinearClassifier train_perceptron(const PerceptronParams& params, std::uint64_t seed,
                                  const Matrix& x, const std::vector<int>& labels);
MlpClassifier train_mlp(const MlpParams& params, std::uint64_t seed, const Matrix& x,
                        const std::vector<int>& labels);

// MLP parameters as one addressable block so finite differences can walk
// every scalar. Layout: w1 row-major, then b1, then w2, then b2.
struct MlpParamBlock {
  Matrix w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static MlpParamBlock zeros(std::size_t dim, int hidden);
  // Seeded uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out)),
  // zero biases. Draw order: w1 row-major, then w2.
  static MlpParamBlock glorot(std::size_t dim, int hidden, Rng& rng);

  std::size_t count() const;
  double get(std::size_t i) const;
  void add(std::size_t i, double delta);
};

// Mean cross-entropy of the network over the given rows.
double mlp_loss(const MlpParamBlock& p, const Matrix& x, const std::vector<int>& labels,
                std::span<const std::size_t> rows);

// Backprop gradients of mlp_loss, written into g (overwritten, same shape).
void mlp_gradients(const MlpParamBlock& p, const Matrix& x, const std::vector<int>& labels,
                   std::span<const std::size_t> rows, MlpParamBlock& g);

// Mean cross-entropy plus (l2/2)*||w||^2; the bias is not penalized.
double logreg_loss(std::span<const double> w, double b, const Matrix& x,
                   const std::vector<int>& labels, double l2);

void logreg_gradients(std::span<const double> w, double b, const Matrix& x,
                      const std::vector<int>& labels, double l2,
                      std::vector<double>& grad_w, double& grad_b);

}  // namespace poisonbench::models::internal
