#include "poisonbench/models.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>

#include <fmt/core.h>

#include "model_internals.hpp"
#include "poisonbench/errors.hpp"
#include "poisonbench/hash.hpp"

namespace poisonbench::models {

namespace {

struct FamilyEntry {
  ModelFamily family;
  const char* key;
  const char* display;
};

constexpr FamilyEntry kFamilyTable[] = {
    {ModelFamily::kSgdLinear, "sgd", "Stochastic Gradient Descent"},
    {ModelFamily::kDecisionTree, "tree", "Decision Tree"},
    {ModelFamily::kRandomForest, "forest", "Random Forest"},
    {ModelFamily::kLogisticRegression, "logreg", "Logistic Regression"},
    {ModelFamily::kKnn, "knn", "KNN Classifier"},
    {ModelFamily::kLinearSvm, "svm", "Support Vector Machine"},
    {ModelFamily::kPerceptron, "perceptron", "Perceptron"},
    {ModelFamily::kMlp, "mlp", "Multi-Layer Perceptron"},
};

const FamilyEntry& entry_for(ModelFamily f) {
  for (const auto& e : kFamilyTable) {
    if (e.family == f) return e;
  }
  throw InvalidHyperparamsError("unknown model family");
}

Hyperparams default_params(ModelFamily family) {
  switch (family) {
    case ModelFamily::kSgdLinear: return SgdLinearParams{};
    case ModelFamily::kDecisionTree: return DecisionTreeParams{};
    case ModelFamily::kRandomForest: return RandomForestParams{};
    case ModelFamily::kLogisticRegression: return LogisticRegressionParams{};
    case ModelFamily::kKnn: return KnnParams{};
    case ModelFamily::kLinearSvm: return LinearSvmParams{};
    case ModelFamily::kPerceptron: return PerceptronParams{};
    case ModelFamily::kMlp: return MlpParams{};
  }
  throw InvalidHyperparamsError("unknown model family");
}

bool params_match_family(const Hyperparams& params, ModelFamily family) {
  switch (family) {
    case ModelFamily::kSgdLinear: return std::holds_alternative<SgdLinearParams>(params);
    case ModelFamily::kDecisionTree: return std::holds_alternative<DecisionTreeParams>(params);
    case ModelFamily::kRandomForest: return std::holds_alternative<RandomForestParams>(params);
    case ModelFamily::kLogisticRegression:
      return std::holds_alternative<LogisticRegressionParams>(params);
    case ModelFamily::kKnn: return std::holds_alternative<KnnParams>(params);
    case ModelFamily::kLinearSvm: return std::holds_alternative<LinearSvmParams>(params);
    case ModelFamily::kPerceptron: return std::holds_alternative<PerceptronParams>(params);
    case ModelFamily::kMlp: return std::holds_alternative<MlpParams>(params);
  }
  return false;
}

void require(bool ok, const std::string& name, const std::string& what) {
  if (!ok) throw InvalidHyperparamsError(fmt::format("{}: {}", name, what));
}

nlohmann::json hyperparams_to_json(const Hyperparams& params) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SgdLinearParams>) {
          return {{"learning_rate", p.learning_rate}, {"l2", p.l2}, {"epochs", p.epochs}};
        } else if constexpr (std::is_same_v<T, DecisionTreeParams>) {
          return {{"max_depth", p.max_depth}, {"min_leaf", p.min_leaf}};
        } else if constexpr (std::is_same_v<T, RandomForestParams>) {
          return {{"n_trees", p.n_trees},
                  {"bootstrap", p.bootstrap},
                  {"max_features", p.max_features},
                  {"max_depth", p.tree.max_depth},
                  {"min_leaf", p.tree.min_leaf}};
        } else if constexpr (std::is_same_v<T, LogisticRegressionParams>) {
          return {{"learning_rate", p.learning_rate}, {"l2", p.l2}, {"iterations", p.iterations}};
        } else if constexpr (std::is_same_v<T, KnnParams>) {
          return {{"k", p.k}};
        } else if constexpr (std::is_same_v<T, LinearSvmParams>) {
          return {{"lambda", p.lambda}, {"epochs", p.epochs}};
        } else if constexpr (std::is_same_v<T, PerceptronParams>) {
          return {{"learning_rate", p.learning_rate}, {"epochs", p.epochs}};
        } else {
          static_assert(std::is_same_v<T, MlpParams>);
          return {{"hidden_units", p.hidden_units},
                  {"batch_size", p.batch_size},
                  {"learning_rate", p.learning_rate},
                  {"epochs", p.epochs}};
        }
      },
      params);
}

Hyperparams hyperparams_from_json(ModelFamily family, const nlohmann::json& j) {
  switch (family) {
    case ModelFamily::kSgdLinear:
      return SgdLinearParams{j.at("learning_rate").get<double>(), j.at("l2").get<double>(),
                             j.at("epochs").get<int>()};
    case ModelFamily::kDecisionTree:
      return DecisionTreeParams{j.at("max_depth").get<int>(), j.at("min_leaf").get<int>()};
    case ModelFamily::kRandomForest:
      return RandomForestParams{
          j.at("n_trees").get<int>(), j.at("bootstrap").get<bool>(),
          j.at("max_features").get<int>(),
          DecisionTreeParams{j.at("max_depth").get<int>(), j.at("min_leaf").get<int>()}};
    case ModelFamily::kLogisticRegression:
      return LogisticRegressionParams{j.at("learning_rate").get<double>(),
                                      j.at("l2").get<double>(), j.at("iterations").get<int>()};
    case ModelFamily::kKnn: return KnnParams{j.at("k").get<int>()};
    case ModelFamily::kLinearSvm:
      return LinearSvmParams{j.at("lambda").get<double>(), j.at("epochs").get<int>()};
    case ModelFamily::kPerceptron:
      return PerceptronParams{j.at("learning_rate").get<double>(), j.at("epochs").get<int>()};
    case ModelFamily::kMlp:
      return MlpParams{j.at("hidden_units").get<int>(), j.at("batch_size").get<int>(),
                       j.at("learning_rate").get<double>(), j.at("epochs").get<int>()};
  }
  throw InvalidHyperparamsError("unknown model family");
}

}  // namespace

const char* family_key(ModelFamily f) { return entry_for(f).key; }

const char* family_display_name(ModelFamily f) { return entry_for(f).display; }

std::optional<ModelFamily> family_from_key(const std::string& key) {
  for (const auto& e : kFamilyTable) {
    if (key == e.key) return e.family;
  }
  return std::nullopt;
}

ModelSpec ModelSpec::with_defaults(ModelFamily family, std::uint64_t seed) {
  ModelSpec spec;
  spec.name = family_key(family);
  spec.family = family;
  spec.params = default_params(family);
  spec.seed = seed;
  return spec;
}

void ModelSpec::validate() const {
  require(!name.empty(), "model", "name must not be empty");
  if (!params_match_family(params, family)) {
    throw InvalidHyperparamsError(
        fmt::format("{}: hyperparameters do not belong to family '{}'", name, family_key(family)));
  }
  std::visit(
      [this](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SgdLinearParams>) {
          require(p.learning_rate > 0.0, name, "learning rate must be positive");
          require(p.l2 >= 0.0, name, "l2 penalty must be nonnegative");
          require(p.epochs > 0, name, "epochs must be positive");
        } else if constexpr (std::is_same_v<T, DecisionTreeParams>) {
          require(p.max_depth >= 0, name, "max depth must be nonnegative (0 = unlimited)");
          require(p.min_leaf >= 1, name, "min leaf size must be at least 1");
        } else if constexpr (std::is_same_v<T, RandomForestParams>) {
          require(p.n_trees >= 1, name, "tree count must be at least 1");
          require(p.max_features >= 0, name, "max features must be nonnegative (0 = sqrt(d))");
          require(p.tree.max_depth >= 0, name, "max depth must be nonnegative (0 = unlimited)");
          require(p.tree.min_leaf >= 1, name, "min leaf size must be at least 1");
        } else if constexpr (std::is_same_v<T, LogisticRegressionParams>) {
          require(p.learning_rate > 0.0, name, "learning rate must be positive");
          require(p.l2 >= 0.0, name, "l2 penalty must be nonnegative");
          require(p.iterations > 0, name, "iteration count must be positive");
        } else if constexpr (std::is_same_v<T, KnnParams>) {
          require(p.k >= 1, name, "k must be at least 1");
          require(p.k % 2 == 1, name, "k must be odd so votes cannot tie");
        } else if constexpr (std::is_same_v<T, LinearSvmParams>) {
          require(p.lambda > 0.0, name, "lambda must be positive");
          require(p.epochs > 0, name, "epochs must be positive");
        } else if constexpr (std::is_same_v<T, PerceptronParams>) {
          require(p.learning_rate > 0.0, name, "learning rate must be positive");
          require(p.epochs > 0, name, "epochs must be positive");
        } else {
          static_assert(std::is_same_v<T, MlpParams>);
          require(p.hidden_units >= 1, name, "hidden unit count must be at least 1");
          require(p.batch_size >= 1, name, "batch size must be at least 1");
          require(p.learning_rate > 0.0, name, "learning rate must be positive");
          require(p.epochs > 0, name, "epochs must be positive");
        }
      },
      params);
}

nlohmann::json ModelSpec::to_json() const {
  return {{"name", name},
          {"family", family_key(family)},
          {"seed", seed},
          {"hyperparams", hyperparams_to_json(params)}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  const auto key = j.at("family").get<std::string>();
  const auto family = family_from_key(key);
  if (!family) throw ConfigError(fmt::format("unknown model family '{}'", key));
  ModelSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.family = *family;
  spec.params = hyperparams_from_json(*family, j.at("hyperparams"));
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

TrainedModel::TrainedModel(ModelSpec spec, std::shared_ptr<const Classifier> impl,
                           std::uint64_t training_fingerprint)
    : spec_(std::move(spec)), impl_(std::move(impl)), training_fingerprint_(training_fingerprint) {}

double TrainedModel::score(std::span<const double> x) const {
  if (x.size() != impl_->dimension()) {
    throw DimensionMismatchError(fmt::format("{}: expected {} features, got {}", spec_.name,
                                             impl_->dimension(), x.size()));
  }
  return impl_->score_one(x);
}

nlohmann::json TrainedModel::to_json() const {
  return {{"format_version", 1},
          {"spec", spec_.to_json()},
          {"dimension", impl_->dimension()},
          {"training_fingerprint", to_hex(training_fingerprint_)},
          {"parameters", impl_->params_to_json()}};
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != 1) {
    throw ConfigError(fmt::format("unsupported model format version {}", version));
  }
  ModelSpec spec = ModelSpec::from_json(j.at("spec"));
  const auto& params = j.at("parameters");
  std::shared_ptr<const Classifier> impl;
  switch (spec.family) {
    case ModelFamily::kSgdLinear:
    case ModelFamily::kLogisticRegression:
    case ModelFamily::kLinearSvm:
    case ModelFamily::kPerceptron:
      impl = LinearClassifier::from_params_json(params);
      break;
    case ModelFamily::kDecisionTree:
      impl = DecisionTreeClassifier::from_params_json(params);
      break;
    case ModelFamily::kRandomForest:
      impl = RandomForestClassifier::from_params_json(params);
      break;
    case ModelFamily::kKnn:
      impl = KnnClassifier::from_params_json(params);
      break;
    case ModelFamily::kMlp:
      impl = MlpClassifier::from_params_json(params);
      break;
  }
  const auto fingerprint =
      std::stoull(j.at("training_fingerprint").get<std::string>(), nullptr, 16);
  return TrainedModel(std::move(spec), std::move(impl), fingerprint);
}

namespace {

std::uint64_t training_fingerprint(const ModelSpec& spec, const data::Dataset& ds) {
  Fnv1a h;
  h.update(data::dataset_fingerprint(ds));
  h.update(spec.seed);
  h.update(std::string_view(family_key(spec.family)));
  h.update(hyperparams_to_json(spec.params).dump());
  return h.digest();
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const data::Dataset& train_data) {
  spec.validate();
  const auto n = train_data.size();
  if (n == 0) {
    throw SingleClassTrainingError(fmt::format("{}: training set is empty", spec.name));
  }
  std::size_t n_malware = 0;
  for (int label : train_data.labels) {
    if (label == data::kMalwareLabel) ++n_malware;
  }
  const bool single_class = n_malware == 0 || n_malware == n;
  if (single_class && spec.family != ModelFamily::kKnn) {
    throw SingleClassTrainingError(fmt::format(
        "{}: training set holds only class {}; both classes are required",
        spec.name, n_malware == 0 ? data::kBenignLabel : data::kMalwareLabel));
  }

  const Matrix& x = train_data.features;
  const std::vector<int>& y = train_data.labels;
  std::shared_ptr<const Classifier> impl;
  switch (spec.family) {
    case ModelFamily::kSgdLinear:
      impl = std::make_shared<LinearClassifier>(
          internal::train_sgd_hinge(std::get<SgdLinearParams>(spec.params), spec.seed, x, y));
      break;
    case ModelFamily::kDecisionTree: {
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      internal::TreeTrainOptions options;
      options.params = std::get<DecisionTreeParams>(spec.params);
      impl = std::make_shared<DecisionTreeClassifier>(
          internal::grow_tree(x, y, std::move(rows), options), train_data.dim());
      break;
    }
    case ModelFamily::kRandomForest:
      impl = std::make_shared<RandomForestClassifier>(internal::train_forest(
          std::get<RandomForestParams>(spec.params), spec.seed, x, y));
      break;
    case ModelFamily::kLogisticRegression:
      impl = std::make_shared<LinearClassifier>(
          internal::train_logreg(std::get<LogisticRegressionParams>(spec.params), x, y));
      break;
    case ModelFamily::kKnn: {
      const int k = std::get<KnnParams>(spec.params).k;
      if (static_cast<std::size_t>(k) > n) {
        throw InvalidHyperparamsError(
            fmt::format("{}: k={} exceeds training set size {}", spec.name, k, n));
      }
      impl = std::make_shared<KnnClassifier>(x, y, k);
      break;
    }
    case ModelFamily::kLinearSvm:
      impl = std::make_shared<LinearClassifier>(
          internal::train_svm_pegasos(std::get<LinearSvmParams>(spec.params), spec.seed, x, y));
      break;
    case ModelFamily::kPerceptron:
      impl = std::make_shared<LinearClassifier>(
          internal::train_perceptron(std::get<PerceptronParams>(spec.params), spec.seed, x, y));
      break;
    case ModelFamily::kMlp:
      impl = std::make_shared<MlpClassifier>(
          internal::train_mlp(std::get<MlpParams>(spec.params), spec.seed, x, y));
      break;
  }
  return TrainedModel(spec, std::move(impl), training_fingerprint(spec, train_data));
}

namespace {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / scale;
}

double gradient_check_mlp(const MlpParams& params, std::uint64_t seed,
                          const data::Dataset& batch) {
  Rng rng(seed);
  internal::MlpParamBlock p =
      internal::MlpParamBlock::glorot(batch.dim(), params.hidden_units, rng);
  internal::MlpParamBlock g =
      internal::MlpParamBlock::zeros(batch.dim(), params.hidden_units);

  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  internal::mlp_gradients(p, batch.features, batch.labels, rows, g);

  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.count(); ++i) {
    p.add(i, kStep);
    const double up = internal::mlp_loss(p, batch.features, batch.labels, rows);
    p.add(i, -2.0 * kStep);
    const double down = internal::mlp_loss(p, batch.features, batch.labels, rows);
    p.add(i, kStep);
    worst = std::max(worst, relative_error(g.get(i), (up - down) / (2.0 * kStep)));
  }
  return worst;
}

double gradient_check_logreg(const LogisticRegressionParams& params,
                             const data::Dataset& batch) {
  // The trainer starts from zero weights, so that is the probe point.
  std::vector<double> w(batch.dim(), 0.0);
  double b = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
  internal::logreg_gradients(w, b, batch.features, batch.labels, params.l2, grad_w, grad_b);

  constexpr double kStep = 1e-5;
  const auto numeric_at = [&](double* slot) {
    *slot += kStep;
    const double up = internal::logreg_loss(w, b, batch.features, batch.labels, params.l2);
    *slot -= 2.0 * kStep;
    const double down = internal::logreg_loss(w, b, batch.features, batch.labels, params.l2);
    *slot += kStep;
    return (up - down) / (2.0 * kStep);
  };

  double worst = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    worst = std::max(worst, relative_error(grad_w[j], numeric_at(&w[j])));
  }
  worst = std::max(worst, relative_error(grad_b, numeric_at(&b)));
  return worst;
}

}  // namespace

double mlp_gradient_check(const ModelSpec& spec, const data::Dataset& batch) {
  spec.validate();
  if (batch.size() == 0) {
    throw SingleClassTrainingError(fmt::format("{}: gradient check batch is empty", spec.name));
  }
  if (spec.family == ModelFamily::kMlp) {
    return gradient_check_mlp(std::get<MlpParams>(spec.params), spec.seed, batch);
  }
  if (spec.family == ModelFamily::kLogisticRegression) {
    return gradient_check_logreg(std::get<LogisticRegressionParams>(spec.params), batch);
  }
  throw InvalidHyperparamsError(fmt::format(
      "{}: gradient checking covers the mlp and logreg families only", spec.name));
}

}  // namespace poisonbench::models
