#pragma once

#include <span>
#include <vector>

#include <json.hpp>

namespace poisonbench::metrics {

// Counts under the malware-positive convention (label 0 is the positive
// class): tp = true 0 predicted 0, fp = true 1 predicted 0,
// fn = true 0 predicted 1, tn = true 1 predicted 1.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
  nlohmann::json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);
};

// Ratios in [0,1]. A zero denominator yields 0.0 and sets the matching flag
// instead of throwing; degenerate cells are data, not errors.
struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  nlohmann::json to_json() const;
  static MetricSet from_json(const nlohmann::json& j);
};

// One vertex per distinct score, swept from the highest score down (a sample
// predicts positive when its score >= the threshold). Parallel arrays;
// point 0 is (0,0) with threshold +inf, the last point is (1,1).
struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<double> thresholds;
  double auc = 0.0;  // trapezoidal area under the points

  std::size_t size() const { return fpr.size(); }
  nlohmann::json to_json() const;
  static RocCurve from_json(const nlohmann::json& j);
};

// Throws LengthMismatchError or InvalidLabelError (labels must be 0/1).
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

MetricSet compute_metrics(const ConfusionMatrix& cm);

// Requires at least one positive (0) and one negative (1) sample; throws
// SingleClassEvaluationError otherwise. Scores are malware confidences.
RocCurve roc(std::span<const int> y_true, std::span<const double> scores);

// Independent AUC: mean over all (positive, negative) pairs of
// 1 / 0.5 / 0 for higher / tied / lower positive score. O(P*N); exists to
// cross-check the trapezoidal sweep.
double auc_pairwise_oracle(std::span<const int> y_true,
                           std::span<const double> scores);

}  // namespace poisonbench::metrics
