#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "poisonbench/dataset.hpp"
#include "poisonbench/metrics.hpp"
#include "poisonbench/models.hpp"
#include "poisonbench/poison.hpp"

namespace poisonbench::harness {

enum class PreprocessingMode {
  kFaithful,  // fit cleaning + scaling statistics on the full table, then split
  kHygienic   // split first, fit statistics on the train partition only
};

enum class PoisonMode {
  kIndependent,  // fresh seeded draw per fraction
  kCumulative    // one shared shuffle, so smaller fractions are prefixes of larger
};

enum class SplitKind { kTrain, kTest };

struct FileSource {
  std::filesystem::path path;
  std::string label_column = "label";
  std::string positive_label = "0";
};

using DataSource = std::variant<FileSource, data::SyntheticSpec>;

struct ExperimentConfig {
  DataSource source = data::SyntheticSpec{};
  data::SplitSpec split{};
  PreprocessingMode preprocessing = PreprocessingMode::kFaithful;
  double missing_row_threshold = 0.5;
  std::vector<models::ModelSpec> model_specs;
  std::vector<double> poison_fractions{0.0, 0.10, 0.20};
  std::uint64_t poison_seed = 4242;
  PoisonMode poison_mode = PoisonMode::kIndependent;
  bool per_model_plans = false;  // one plan per (model, fraction) for variance studies
  poison::ThreatModel threat = poison::ThreatModel::executable_default();
  std::filesystem::path output_dir = "out";

  // Fractions must be sorted ascending, within [0,1], and include 0.0 so
  // every run carries its clean baseline; model names must be unique.
  void validate() const;  // throws ConfigError
};

// Experiment identity as sorted dotted key=value pairs. Execution-only knobs
// (output directory, report formats, worker count) are excluded: they cannot
// change any number in the grid.
std::map<std::string, std::string> canonical_items(const ExperimentConfig& config);
std::string config_fingerprint(const ExperimentConfig& config);

struct CellResult {
  std::string model;
  double poison_fraction = 0.0;
  SplitKind split = SplitKind::kTrain;
  metrics::MetricSet metric_set;
  metrics::ConfusionMatrix confusion;
  std::optional<metrics::RocCurve> roc;  // test cells only
};

struct PlanRecord {
  double fraction = 0.0;
  std::string model;  // empty when the plan is shared by all models
  poison::PoisonPlan plan;
};

struct ExperimentResult {
  std::string config_fingerprint;
  std::map<std::string, std::string> canonical_config;
  data::PreprocessReport preprocess;
  std::uint64_t train_fingerprint = 0;
  std::uint64_t test_fingerprint = 0;
  std::vector<PlanRecord> plans;   // fractions > 0 only
  std::vector<CellResult> grid;    // |models| x |fractions| x {train,test}
  std::vector<double> cell_seconds;  // parallel to grid; never serialized

  nlohmann::json to_json() const;
  static ExperimentResult from_json(const nlohmann::json& j);
};

struct RunOptions {
  unsigned workers = 0;  // 0 = hardware concurrency; 1 = sequential
};

// Train -> poison -> retrain -> evaluate over the whole grid. The test
// partition is split once, never poisoned, and verified unchanged across
// fractions. Train-split metrics are computed against the labels the model
// was fitted on (the poisoned ones when fraction > 0); fraction 0.0 goes
// straight to training without touching the poison module. All seeds are
// derived up front, so any worker count produces the identical result. On a
// cell failure, completed cells are dumped to output_dir/partial_result.json
// and a HarnessError naming the cell is thrown.
ExperimentResult run(const ExperimentConfig& config, const RunOptions& options = {});

enum class ReportFormat { kJson, kCsv, kMarkdown, kRocPoints };

// Writes the selected formats into output_dir and returns the paths written
// (sorted). Same result -> byte-identical files. json: the full result.
// csv: per-fraction metric and confusion tables plus provenance.json.
// markdown: one metrics table per fraction plus a provenance section.
// roc_points: one two-column file per test cell, named <model>_<fraction>.roc.
std::vector<std::filesystem::path> emit_report(
    const ExperimentResult& result, const std::set<ReportFormat>& formats,
    const std::filesystem::path& output_dir);

struct CellDelta {
  std::string model;
  double fraction = 0.0;
  SplitKind split = SplitKind::kTrain;
  double accuracy_pp = 0.0;  // result minus baseline, percentage points
  double precision_pp = 0.0;
  double recall_pp = 0.0;
  double f1_pp = 0.0;
  bool flagged = false;
};

struct ComparisonReport {
  double tolerance_pp = 0.0;
  std::vector<CellDelta> deltas;

  bool any_flagged() const;
  nlohmann::json to_json() const;
};

// Per-cell metric deltas in percentage points; a cell is flagged when any
// metric moved more than tolerance_pp. Throws GridMismatchError unless both
// results cover the same models, fractions, and splits.
ComparisonReport compare_to_baseline(const ExperimentResult& result,
                                     const ExperimentResult& baseline,
                                     double tolerance_pp);

}  // namespace poisonbench::harness
