#include "poisonbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"

namespace poisonbench::metrics {

nlohmann::json ConfusionMatrix::to_json() const {
  return {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}};
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
          j.at("fn").get<std::size_t>(), j.at("tn").get<std::size_t>()};
}

nlohmann::json MetricSet::to_json() const {
  return {{"accuracy", accuracy},
          {"precision", precision},
          {"recall", recall},
          {"f1", f1},
          {"precision_undefined", precision_undefined},
          {"recall_undefined", recall_undefined},
          {"f1_undefined", f1_undefined}};
}

MetricSet MetricSet::from_json(const nlohmann::json& j) {
  MetricSet m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.precision_undefined = j.at("precision_undefined").get<bool>();
  m.recall_undefined = j.at("recall_undefined").get<bool>();
  m.f1_undefined = j.at("f1_undefined").get<bool>();
  return m;
}

nlohmann::json RocCurve::to_json() const {
  nlohmann::json thr = nlohmann::json::array();
  for (double t : thresholds) {
    // JSON has no infinity; the opening threshold (nothing predicted
    // positive) serializes as null.
    if (std::isinf(t)) {
      thr.push_back(nullptr);
    } else {
      thr.push_back(t);
    }
  }
  return {{"fpr", fpr}, {"tpr", tpr}, {"thresholds", thr}, {"auc", auc}};
}

RocCurve RocCurve::from_json(const nlohmann::json& j) {
  RocCurve c;
  c.fpr = j.at("fpr").get<std::vector<double>>();
  c.tpr = j.at("tpr").get<std::vector<double>>();
  for (const auto& t : j.at("thresholds")) {
    c.thresholds.push_back(t.is_null() ? std::numeric_limits<double>::infinity()
                                       : t.get<double>());
  }
  c.auc = j.at("auc").get<double>();
  return c;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw LengthMismatchError(fmt::format("{} true labels vs {} predictions",
                                          y_true.size(), y_pred.size()));
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw InvalidLabelError(
          fmt::format("labels must be 0 or 1, got true={} pred={} at row {}", t, p, i));
    }
    // Malware (0) is the positive class.
    if (t == 0) {
      p == 0 ? ++cm.tp : ++cm.fn;
    } else {
      p == 0 ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

MetricSet compute_metrics(const ConfusionMatrix& cm) {
  MetricSet m;
  const double tp = static_cast<double>(cm.tp);
  const double fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn);
  const double tn = static_cast<double>(cm.tn);

  const double total = tp + fp + fn + tn;
  m.accuracy = total == 0.0 ? 0.0 : (tp + tn) / total;

  if (cm.tp + cm.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = tp / (tp + fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = tp / (tp + fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

namespace {

void require_both_classes(std::span<const int> y_true) {
  bool has_pos = false;
  bool has_neg = false;
  for (int t : y_true) {
    if (t == 0) has_pos = true;
    else if (t == 1) has_neg = true;
    else throw InvalidLabelError(fmt::format("labels must be 0 or 1, got {}", t));
  }
  if (!has_pos || !has_neg) {
    throw SingleClassEvaluationError("ROC needs at least one sample of each class");
  }
}

}  // namespace

RocCurve roc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) {
    throw LengthMismatchError(
        fmt::format("{} labels vs {} scores", y_true.size(), scores.size()));
  }
  require_both_classes(y_true);

  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (int t : y_true) (t == 0 ? n_pos : n_neg)++;

  std::vector<std::size_t> order(y_true.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());

  // Sweep distinct scores from the top; samples sharing a score enter
  // together, which is what gives ties their diagonal segment.
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (y_true[order[i]] == 0 ? tp : fp)++;
      ++i;
    }
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    curve.thresholds.push_back(threshold);
  }

  double auc = 0.0;
  for (std::size_t k = 1; k < curve.fpr.size(); ++k) {
    auc += (curve.fpr[k] - curve.fpr[k - 1]) * (curve.tpr[k] + curve.tpr[k - 1]) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

double auc_pairwise_oracle(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) {
    throw LengthMismatchError(
        fmt::format("{} labels vs {} scores", y_true.size(), scores.size()));
  }
  require_both_classes(y_true);

  std::size_t pairs = 0;
  double credit = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 0) continue;
    for (std::size_t j = 0; j < y_true.size(); ++j) {
      if (y_true[j] != 1) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        credit += 1.0;
      } else if (scores[i] == scores[j]) {
        credit += 0.5;
      }
    }
  }
  return credit / static_cast<double>(pairs);
}

}  // namespace poisonbench::metrics
