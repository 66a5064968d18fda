#include <cmath>

#include "model_internals.hpp"
#include "poisonbench/models.hpp"
#include "poisonbench/parallel.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::models {

double RandomForestClassifier::score_one(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.score_one(x);
  return sum / static_cast<double>(trees_.size());
}

nlohmann::json RandomForestClassifier::params_to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) trees.push_back(tree.params_to_json());
  return {{"trees", trees}};
}

std::shared_ptr<RandomForestClassifier> RandomForestClassifier::from_params_json(
    const nlohmann::json& j) {
  std::vector<DecisionTreeClassifier> trees;
  for (const auto& t : j.at("trees")) {
    trees.push_back(std::move(*DecisionTreeClassifier::from_params_json(t)));
  }
  return std::make_shared<RandomForestClassifier>(std::move(trees));
}

namespace internal {

RandomForestClassifier train_forest(const RandomForestParams& params,
                                    std::uint64_t seed, const Matrix& x,
                                    const std::vector<int>& labels) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  int max_features = params.max_features;
  if (max_features <= 0) {
    max_features = static_cast<int>(std::floor(std::sqrt(static_cast<double>(d))));
    if (max_features < 1) max_features = 1;
  }

  const auto n_trees = static_cast<std::size_t>(params.n_trees);
  std::vector<std::vector<DecisionTreeClassifier::Node>> grown(n_trees);

  // Each tree owns a seed derived from the model seed, so trees can be grown
  // in any order (or in parallel) without changing a single node.
  parallel_for(n_trees, 0, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows;
    rows.reserve(n);
    if (params.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(static_cast<std::size_t>(rng.next_below(n)));
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(i);
    }
    TreeTrainOptions options;
    options.params = params.tree;
    options.max_features = max_features;
    options.feature_rng = &rng;
    grown[t] = grow_tree(x, labels, std::move(rows), options);
  });

  std::vector<DecisionTreeClassifier> trees;
  trees.reserve(n_trees);
  for (auto& nodes : grown) {
    trees.emplace_back(std::move(nodes), d);
  }
  return RandomForestClassifier(std::move(trees));
}

}  // namespace internal
}  // namespace poisonbench::models
