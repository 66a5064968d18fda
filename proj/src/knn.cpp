#include <algorithm>
#include <vector>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"
#include "poisonbench/models.hpp"

namespace poisonbench::models {

namespace {

// Squared Euclidean distance, accumulated in ascending column order. Both the
// production scan and the oracle use this exact routine so their comparisons
// see identical bits; sqrt is skipped because it preserves order and ties.
double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

// (distance, row) ordering: nearer first, lower row index on ties.
bool closer(double dist_a, std::size_t row_a, double dist_b, std::size_t row_b) {
  if (dist_a != dist_b) return dist_a < dist_b;
  return row_a < row_b;
}

}  // namespace

double KnnClassifier::score_one(std::span<const double> x) const {
  const std::size_t n = features_.rows();
  const auto k = static_cast<std::size_t>(k_);

  // Fixed-size neighbor buffer kept sorted by (distance, row); a candidate
  // worse than the current k-th is rejected without shifting anything.
  std::vector<std::pair<double, std::size_t>> best;
  best.reserve(k);
  for (std::size_t r = 0; r < n; ++r) {
    const double dist = squared_distance(features_.row(r), x);
    if (best.size() == k &&
        !closer(dist, r, best.back().first, best.back().second)) {
      continue;
    }
    auto pos = best.begin();
    while (pos != best.end() && closer(pos->first, pos->second, dist, r)) ++pos;
    best.insert(pos, {dist, r});
    if (best.size() > k) best.pop_back();
  }

  std::size_t malware = 0;
  for (const auto& [dist, row] : best) {
    if (labels_[row] == data::kMalwareLabel) ++malware;
  }
  return static_cast<double>(malware) / static_cast<double>(best.size());
}

nlohmann::json KnnClassifier::params_to_json() const {
  // The training set is the model; it is stored verbatim.
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < features_.rows(); ++r) {
    const auto row = features_.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"k", k_}, {"features", rows}, {"labels", labels_}};
}

std::shared_ptr<KnnClassifier> KnnClassifier::from_params_json(const nlohmann::json& j) {
  const auto rows = j.at("features").get<std::vector<std::vector<double>>>();
  Matrix features(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) features(r, c) = rows[r][c];
  }
  return std::make_shared<KnnClassifier>(std::move(features),
                                         j.at("labels").get<std::vector<int>>(),
                                         j.at("k").get<int>());
}

int knn_brute_oracle(const data::Dataset& train, std::span<const double> x, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > train.size()) {
    throw InvalidHyperparamsError(
        fmt::format("k={} invalid for {} training rows", k, train.size()));
  }
  if (x.size() != train.dim()) {
    throw DimensionMismatchError(
        fmt::format("query has {} features, training data has {}", x.size(), train.dim()));
  }

  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(train.size());
  for (std::size_t r = 0; r < train.size(); ++r) {
    all.emplace_back(squared_distance(train.features.row(r), x), r);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return closer(a.first, a.second, b.first, b.second);
  });

  std::size_t malware = 0;
  for (int i = 0; i < k; ++i) {
    if (train.labels[all[static_cast<std::size_t>(i)].second] == data::kMalwareLabel) {
      ++malware;
    }
  }
  // Majority vote; an even split goes to malware.
  return 2 * malware >= static_cast<std::size_t>(k) ? data::kMalwareLabel
                                                    : data::kBenignLabel;
}

}  // namespace poisonbench::models
