#include <algorithm>
#include <vector>

#include "model_internals.hpp"
#include "poisonbench/models.hpp"

namespace poisonbench::models {

double DecisionTreeClassifier::score_one(std::span<const double> x) const {
  std::size_t node = 0;
  while (!nodes_[node].is_leaf()) {
    const auto& n = nodes_[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold
                                        ? n.left
                                        : n.right);
  }
  return nodes_[node].malware_fraction;
}

nlohmann::json DecisionTreeClassifier::params_to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"malware_fraction", n.malware_fraction}});
  }
  return {{"dimension", dimension_}, {"nodes", nodes}};
}

std::shared_ptr<DecisionTreeClassifier> DecisionTreeClassifier::from_params_json(
    const nlohmann::json& j) {
  std::vector<Node> nodes;
  for (const auto& n : j.at("nodes")) {
    nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                     n.at("left").get<int>(), n.at("right").get<int>(),
                     n.at("malware_fraction").get<double>()});
  }
  return std::make_shared<DecisionTreeClassifier>(std::move(nodes),
                                                  j.at("dimension").get<std::size_t>());
}

namespace internal {

namespace {

double gini(std::size_t malware, std::size_t total) {
  if (total == 0) return 0.0;
  const double pm = static_cast<double>(malware) / static_cast<double>(total);
  const double pb = 1.0 - pm;
  return 1.0 - pm * pm - pb * pb;
}

struct BestSplit {
  double gain = -1.0;  // any real candidate (gain >= 0) beats this
  int feature = -1;
  double threshold = 0.0;
};

struct WorkItem {
  std::vector<std::size_t> rows;
  int depth;
  int node_index;
};

}  // namespace

std::vector<DecisionTreeClassifier::Node> grow_tree(const Matrix& x,
                                                    const std::vector<int>& labels,
                                                    std::vector<std::size_t> rows,
                                                    const TreeTrainOptions& options) {
  using Node = DecisionTreeClassifier::Node;
  const std::size_t d = x.cols();
  const std::size_t min_leaf = options.params.min_leaf < 1
                                   ? 1
                                   : static_cast<std::size_t>(options.params.min_leaf);

  std::vector<Node> nodes;
  nodes.emplace_back();

  // Explicit stack instead of recursion: trees grown on heavily flipped
  // labels can chain far deeper than a thread stack tolerates.
  std::vector<WorkItem> stack;
  stack.push_back({std::move(rows), 0, 0});

  std::vector<std::pair<double, int>> sorted;  // (value, label) scratch
  std::vector<int> feature_pool;

  while (!stack.empty()) {
    WorkItem item = std::move(stack.back());
    stack.pop_back();
    const auto& node_rows = item.rows;
    const std::size_t n = node_rows.size();

    std::size_t malware = 0;
    for (auto r : node_rows) {
      if (labels[r] == data::kMalwareLabel) ++malware;
    }
    const double node_gini = gini(malware, n);

    auto make_leaf = [&] {
      nodes[static_cast<std::size_t>(item.node_index)].feature = -1;
      nodes[static_cast<std::size_t>(item.node_index)].malware_fraction =
          static_cast<double>(malware) / static_cast<double>(n);
    };

    const bool depth_capped =
        options.params.max_depth > 0 && item.depth >= options.params.max_depth;
    if (malware == 0 || malware == n || depth_capped || n < 2 * min_leaf) {
      make_leaf();
      continue;
    }

    // Candidate features: all of them, or a seeded sample without
    // replacement. The sample is sorted ascending so the tie rule (lowest
    // feature, then lowest threshold) never depends on draw order.
    feature_pool.clear();
    if (options.max_features > 0 && static_cast<std::size_t>(options.max_features) < d) {
      std::vector<int> all(d);
      for (std::size_t f = 0; f < d; ++f) all[f] = static_cast<int>(f);
      for (int i = 0; i < options.max_features; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       static_cast<std::size_t>(options.feature_rng->next_below(
                           d - static_cast<std::size_t>(i)));
        std::swap(all[static_cast<std::size_t>(i)], all[j]);
        feature_pool.push_back(all[static_cast<std::size_t>(i)]);
      }
      std::sort(feature_pool.begin(), feature_pool.end());
    } else {
      for (std::size_t f = 0; f < d; ++f) feature_pool.push_back(static_cast<int>(f));
    }

    BestSplit best;
    for (int f : feature_pool) {
      sorted.clear();
      sorted.reserve(n);
      for (auto r : node_rows) {
        sorted.emplace_back(x(r, static_cast<std::size_t>(f)), labels[r]);
      }
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (sorted.front().first == sorted.back().first) continue;  // constant here

      // One pass over the sorted column; a boundary between distinct values
      // is a candidate threshold. Strict improvement keeps the first (lowest
      // feature, lowest threshold) among exact ties, and a zero-gain split
      // still counts as a candidate so impure nodes keep subdividing.
      std::size_t left_malware = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (sorted[i - 1].second == data::kMalwareLabel) ++left_malware;
        if (sorted[i - 1].first == sorted[i].first) continue;
        if (i < min_leaf || n - i < min_leaf) continue;

        const double weighted =
            (static_cast<double>(i) * gini(left_malware, i) +
             static_cast<double>(n - i) * gini(malware - left_malware, n - i)) /
            static_cast<double>(n);
        const double gain = node_gini - weighted;
        if (gain > best.gain) {
          // Midpoint of the boundary pair; if rounding lands it on the upper
          // value, fall back to the lower so both children stay nonempty
          // under the x <= threshold routing.
          double threshold =
              sorted[i - 1].first + (sorted[i].first - sorted[i - 1].first) / 2.0;
          if (!(threshold < sorted[i].first)) threshold = sorted[i - 1].first;
          best = {gain, f, threshold};
        }
      }
    }

    if (best.feature < 0) {
      // Impure but indivisible: duplicate feature vectors with conflicting
      // labels (or the min-leaf bound). Majority leaf; 50/50 scores 0.5 and
      // therefore predicts malware.
      make_leaf();
      continue;
    }

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (auto r : node_rows) {
      (x(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left_rows
                                                                      : right_rows)
          .push_back(r);
    }

    const int left_index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes.emplace_back();
    auto& interior = nodes[static_cast<std::size_t>(item.node_index)];
    interior.feature = best.feature;
    interior.threshold = best.threshold;
    interior.left = left_index;
    interior.right = left_index + 1;

    // Right pushed first so the left child is grown (and numbered) next,
    // keeping node layout independent of anything but the data.
    stack.push_back({std::move(right_rows), item.depth + 1, left_index + 1});
    stack.push_back({std::move(left_rows), item.depth + 1, left_index});
  }
  return nodes;
}

}  // namespace internal
}  // namespace poisonbench::models
