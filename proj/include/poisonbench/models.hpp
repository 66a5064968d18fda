#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "poisonbench/dataset.hpp"
#include "poisonbench/matrix.hpp"

namespace poisonbench::models {

enum class ModelFamily {
  kSgdLinear,
  kDecisionTree,
  kRandomForest,
  kLogisticRegression,
  kKnn,
  kLinearSvm,
  kPerceptron,
  kMlp
};

inline constexpr ModelFamily kAllFamilies[] = {
    ModelFamily::kSgdLinear,      ModelFamily::kDecisionTree,
    ModelFamily::kRandomForest,   ModelFamily::kLogisticRegression,
    ModelFamily::kKnn,            ModelFamily::kLinearSvm,
    ModelFamily::kPerceptron,     ModelFamily::kMlp};

const char* family_key(ModelFamily f);           // "sgd", "tree", ...
const char* family_display_name(ModelFamily f);  // "Stochastic Gradient Descent", ...
std::optional<ModelFamily> family_from_key(const std::string& key);

// Hinge loss, L2 penalty, fixed-rate SGD with a seeded per-epoch shuffle.
struct SgdLinearParams {
  double learning_rate = 0.01;
  double l2 = 1e-4;
  int epochs = 20;
  friend bool operator==(const SgdLinearParams&, const SgdLinearParams&) = default;
};

// CART with Gini impurity and exhaustive threshold search. max_depth 0 means
// unlimited. Impure nodes keep splitting even at zero gain as long as some
// feature still varies, so consistent data is fitted exactly.
struct DecisionTreeParams {
  int max_depth = 0;
  int min_leaf = 1;
  friend bool operator==(const DecisionTreeParams&, const DecisionTreeParams&) = default;
};

// Bagged trees with per-split feature subsampling. max_features 0 means
// floor(sqrt(d)). Per-tree seeds are derived from the model seed.
struct RandomForestParams {
  int n_trees = 100;
  bool bootstrap = true;
  int max_features = 0;
  DecisionTreeParams tree{};
  friend bool operator==(const RandomForestParams&, const RandomForestParams&) = default;
};

// Full-batch gradient descent on mean cross-entropy with L2 penalty.
struct LogisticRegressionParams {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  int iterations = 500;
  friend bool operator==(const LogisticRegressionParams&, const LogisticRegressionParams&) = default;
};

// Exhaustive Euclidean scan; k must be odd. Distance ties prefer the lower
// training row index.
struct KnnParams {
  int k = 5;
  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

// Pegasos-style stochastic subgradient on the hinge objective: step 1/(λt),
// bias folded into the regularized parameters, projection onto the 1/sqrt(λ)
// ball, seeded per-epoch shuffle.
struct LinearSvmParams {
  double lambda = 1e-4;
  int epochs = 20;
  friend bool operator==(const LinearSvmParams&, const LinearSvmParams&) = default;
};

// Classic mistake-driven updates (a zero margin counts as a mistake).
struct PerceptronParams {
  double learning_rate = 1.0;
  int epochs = 50;
  friend bool operator==(const PerceptronParams&, const PerceptronParams&) = default;
};

// One ReLU hidden layer, sigmoid output, mean cross-entropy, mini-batch SGD.
// Weights start uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)), biases
// at zero, all draws seeded.
struct MlpParams {
  int hidden_units = 100;
  int batch_size = 64;
  double learning_rate = 0.01;
  int epochs = 50;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

using Hyperparams =
    std::variant<SgdLinearParams, DecisionTreeParams, RandomForestParams,
                 LogisticRegressionParams, KnnParams, LinearSvmParams,
                 PerceptronParams, MlpParams>;

struct ModelSpec {
  std::string name;  // unique within an experiment; defaults to the family key
  ModelFamily family = ModelFamily::kSgdLinear;
  Hyperparams params = SgdLinearParams{};
  std::uint64_t seed = 1;

  static ModelSpec with_defaults(ModelFamily family, std::uint64_t seed);
  void validate() const;  // throws InvalidHyperparamsError

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// Fitted state. score_one returns malware confidence in [0,1]; higher means
// more confidently malware (label 0).
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual double score_one(std::span<const double> x) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual nlohmann::json params_to_json() const = 0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Shared by the four linear families. The margin is oriented so that a
// positive value means malware; score = sigmoid(margin).
class LinearClassifier final : public Classifier {
 public:
  LinearClassifier(std::vector<double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {}

  double score_one(std::span<const double> x) const override;
  std::size_t dimension() const override { return weights_.size(); }
  nlohmann::json params_to_json() const override;
  static std::shared_ptr<LinearClassifier> from_params_json(const nlohmann::json& j);

  double margin(std::span<const double> x) const;
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
};

class DecisionTreeClassifier final : public Classifier {
 public:
  // feature < 0 marks a leaf; malware_fraction is only meaningful on leaves.
  // Interior nodes route x[feature] <= threshold to the left child.
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double malware_fraction = 0.0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  DecisionTreeClassifier(std::vector<Node> nodes, std::size_t dimension)
      : nodes_(std::move(nodes)), dimension_(dimension) {}

  double score_one(std::span<const double> x) const override;
  std::size_t dimension() const override { return dimension_; }
  nlohmann::json params_to_json() const override;
  static std::shared_ptr<DecisionTreeClassifier> from_params_json(const nlohmann::json& j);

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
  std::size_t dimension_;
};

class RandomForestClassifier final : public Classifier {
 public:
  explicit RandomForestClassifier(std::vector<DecisionTreeClassifier> trees)
      : trees_(std::move(trees)) {}

  // Mean of the member trees' leaf fractions. With fully grown trees this
  // equals the fraction of trees voting malware, so thresholding the mean at
  // 0.5 is the majority vote.
  double score_one(std::span<const double> x) const override;
  std::size_t dimension() const override {
    return trees_.empty() ? 0 : trees_.front().dimension();
  }
  nlohmann::json params_to_json() const override;
  static std::shared_ptr<RandomForestClassifier> from_params_json(const nlohmann::json& j);

  const std::vector<DecisionTreeClassifier>& trees() const { return trees_; }

 private:
  std::vector<DecisionTreeClassifier> trees_;
};

class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(Matrix train_features, std::vector<int> train_labels, int k)
      : features_(std::move(train_features)), labels_(std::move(train_labels)), k_(k) {}

  // Fraction of the k nearest training rows (squared Euclidean, ties broken
  // by lower row index) that are malware.
  double score_one(std::span<const double> x) const override;
  std::size_t dimension() const override { return features_.cols(); }
  nlohmann::json params_to_json() const override;
  static std::shared_ptr<KnnClassifier> from_params_json(const nlohmann::json& j);

  int k() const { return k_; }

 private:
  Matrix features_;
  std::vector<int> labels_;
  int k_;
};

class MlpClassifier final : public Classifier {
 public:
  MlpClassifier(Matrix w1, std::vector<double> b1, std::vector<double> w2, double b2)
      : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(b2) {}

  double score_one(std::span<const double> x) const override;  // output activation
  std::size_t dimension() const override { return w1_.cols(); }
  nlohmann::json params_to_json() const override;
  static std::shared_ptr<MlpClassifier> from_params_json(const nlohmann::json& j);

 private:
  Matrix w1_;               // hidden x d
  std::vector<double> b1_;  // hidden
  std::vector<double> w2_;  // hidden
  double b2_;
};

// predict(x) is malware (0) exactly when score(x) >= 0.5; there is no second
// decision path, so the threshold rule holds for every family by construction.
inline int label_from_score(double score) { return score >= 0.5 ? 0 : 1; }

class TrainedModel {
 public:
  TrainedModel(ModelSpec spec, std::shared_ptr<const Classifier> impl,
               std::uint64_t training_fingerprint);

  const ModelSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  std::size_t dimension() const { return impl_->dimension(); }
  std::uint64_t training_fingerprint() const { return training_fingerprint_; }
  const Classifier& classifier() const { return *impl_; }

  double score(std::span<const double> x) const;  // DimensionMismatchError
  int predict(std::span<const double> x) const {
    return label_from_score(score(x));
  }

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);

 private:
  ModelSpec spec_;
  std::shared_ptr<const Classifier> impl_;
  std::uint64_t training_fingerprint_;
};

// Fits spec.family on the training data. Requires a nonempty set with both
// classes present (KNN tolerates one class). Identical spec + data give
// bit-identical parameters. Throws SingleClassTrainingError,
// NonFiniteLossError, or InvalidHyperparamsError.
TrainedModel train(const ModelSpec& spec, const data::Dataset& train_data);

// Reference KNN: full sort of (squared distance, row index) pairs, majority
// vote over the first k with even splits resolving to malware. Independent of
// KnnClassifier's selection loop; exists to cross-check it.
int knn_brute_oracle(const data::Dataset& train, std::span<const double> x, int k);

// Compares analytic gradients of the family's training loss against central
// finite differences (step 1e-5) over every parameter at the seeded initial
// point, and returns the maximum relative error. Supports kMlp and
// kLogisticRegression.
double mlp_gradient_check(const ModelSpec& spec, const data::Dataset& batch);

}  // namespace poisonbench::models
