#include "poisonbench/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <utility>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"
#include "poisonbench/hash.hpp"
#include "poisonbench/parallel.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::harness {

namespace {

const char* split_key(SplitKind s) { return s == SplitKind::kTrain ? "train" : "test"; }

SplitKind split_from_key(const std::string& s) {
  if (s == "train") return SplitKind::kTrain;
  if (s == "test") return SplitKind::kTest;
  throw ConfigError(fmt::format("unknown split '{}'", s));
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt::format("{}", values[i]);
  }
  return out;
}

// Scalar JSON value as canonical text (numbers via the library's
// shortest-round-trip printer, bools as true/false).
std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError(fmt::format("split.train_fraction must lie in (0,1), got {}",
                                  split.train_fraction));
  }
  if (!(missing_row_threshold >= 0.0 && missing_row_threshold <= 1.0)) {
    throw ConfigError(fmt::format("preprocess.missing_row_threshold must lie in [0,1], got {}",
                                  missing_row_threshold));
  }
  if (const auto* file = std::get_if<FileSource>(&source)) {
    if (file->path.empty()) throw ConfigError("data.path must not be empty");
    if (file->label_column.empty()) throw ConfigError("data.label_column must not be empty");
  } else {
    std::get<data::SyntheticSpec>(source).validate();
  }

  if (model_specs.empty()) throw ConfigError("at least one model is required");
  std::set<std::string> names;
  for (const auto& spec : model_specs) {
    try {
      spec.validate();
    } catch (const InvalidHyperparamsError& e) {
      throw ConfigError(e.what());
    }
    if (!names.insert(spec.name).second) {
      throw ConfigError(fmt::format("duplicate model name '{}'", spec.name));
    }
  }

  if (poison_fractions.empty() || poison_fractions.front() != 0.0) {
    throw ConfigError("poison.fractions must start with 0.0 (the clean baseline)");
  }
  for (std::size_t i = 0; i < poison_fractions.size(); ++i) {
    const double f = poison_fractions[i];
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ConfigError(fmt::format("poison fraction {} is outside [0,1]", f));
    }
    if (i > 0 && !(poison_fractions[i - 1] < f)) {
      throw ConfigError("poison.fractions must be strictly ascending");
    }
  }
}

std::map<std::string, std::string> canonical_items(const ExperimentConfig& config) {
  std::map<std::string, std::string> items;

  if (const auto* file = std::get_if<FileSource>(&config.source)) {
    items["data.source"] = "file";
    items["data.path"] = file->path.string();
    items["data.label_column"] = file->label_column;
    items["data.positive_label"] = file->positive_label;
  } else {
    const auto& spec = std::get<data::SyntheticSpec>(config.source);
    items["data.source"] = "synthetic";
    items["synthetic.n0"] = fmt::format("{}", spec.n_per_class[0]);
    items["synthetic.n1"] = fmt::format("{}", spec.n_per_class[1]);
    items["synthetic.dimension"] = fmt::format("{}", spec.dimension);
    items["synthetic.mean0"] = join_doubles(spec.class_means[0]);
    items["synthetic.mean1"] = join_doubles(spec.class_means[1]);
    items["synthetic.noise"] = fmt::format("{}", spec.noise_scale);
    items["synthetic.seed"] = fmt::format("{}", spec.seed);
  }

  items["split.train_fraction"] = fmt::format("{}", config.split.train_fraction);
  items["split.seed"] = fmt::format("{}", config.split.shuffle_seed);
  items["preprocess.mode"] =
      config.preprocessing == PreprocessingMode::kFaithful ? "faithful" : "hygienic";
  items["preprocess.missing_row_threshold"] = fmt::format("{}", config.missing_row_threshold);

  std::string model_list;
  for (const auto& spec : config.model_specs) {
    if (!model_list.empty()) model_list += ',';
    model_list += spec.name;
    const std::string prefix = "models." + spec.name;
    items[prefix + ".family"] = models::family_key(spec.family);
    items[prefix + ".seed"] = fmt::format("{}", spec.seed);
    const nlohmann::json hyperparams = spec.to_json().at("hyperparams");
    for (const auto& [key, value] : hyperparams.items()) {
      items[prefix + "." + key] = scalar_text(value);
    }
  }
  items["models"] = model_list;

  items["poison.fractions"] = join_doubles(config.poison_fractions);
  items["poison.seed"] = fmt::format("{}", config.poison_seed);
  items["poison.mode"] =
      config.poison_mode == PoisonMode::kIndependent ? "independent" : "cumulative";
  items["poison.per_model_plans"] = config.per_model_plans ? "true" : "false";

  items["threat.surface"] = poison::to_string(config.threat.surface);
  items["threat.knowledge"] = poison::to_string(config.threat.knowledge);
  items["threat.capability"] = poison::to_string(config.threat.capability);
  items["threat.goal"] = poison::to_string(config.threat.goal);

  return items;
}

std::string config_fingerprint(const ExperimentConfig& config) {
  Fnv1a h;
  for (const auto& [key, value] : canonical_items(config)) {
    h.update(key);
    h.update(std::string_view("="));
    h.update(value);
    h.update(std::string_view("\n"));
  }
  return to_hex(h.digest());
}

namespace {

struct PreparedData {
  data::Dataset train;
  data::Dataset test;
  data::PreprocessReport report;
};

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  if (const auto* synth = std::get_if<data::SyntheticSpec>(&config.source)) {
    data::Dataset ds = data::generate_synthetic(*synth);
    out.report.missing_row_threshold = config.missing_row_threshold;
    std::tie(out.train, out.test) = data::split(ds, config.split);
    return out;
  }

  const auto& file = std::get<FileSource>(config.source);
  data::FeatureTable table =
      data::load_table(file.path, file.label_column, file.positive_label);

  if (config.preprocessing == PreprocessingMode::kFaithful) {
    auto [cleaned, clean_report] = data::clean(table, config.missing_row_threshold);
    auto [normalized, scale_report] = data::normalize(data::to_dataset(cleaned));
    out.report = clean_report;
    out.report.column_min = scale_report.column_min;
    out.report.column_max = scale_report.column_max;
    std::tie(out.train, out.test) = data::split(normalized, config.split);
    return out;
  }

  // Hygienic: rows are dropped before splitting (a per-row decision leaks
  // nothing), but imputation means and scaling stats come from the training
  // partition alone and are merely applied to the held-out side.
  std::size_t dropped = 0;
  data::FeatureTable kept =
      data::drop_sparse_rows(table, config.missing_row_threshold, &dropped);
  auto [train_table, test_table] = data::split_table(kept, config.split);
  auto [train_clean, train_report] =
      data::clean(train_table, config.missing_row_threshold);
  auto [test_clean, test_report] = data::clean(
      test_table, config.missing_row_threshold, train_report.column_means);
  (void)test_report;
  auto [train_norm, scale_report] = data::normalize(data::to_dataset(train_clean));
  auto [test_norm, applied_report] =
      data::normalize(data::to_dataset(test_clean), scale_report);
  (void)applied_report;
  out.report = train_report;
  out.report.rows_dropped = dropped;
  out.report.column_min = scale_report.column_min;
  out.report.column_max = scale_report.column_max;
  out.train = std::move(train_norm);
  out.test = std::move(test_norm);
  return out;
}

CellResult evaluate_cell(const models::TrainedModel& model, const data::Dataset& ds,
                         double fraction, SplitKind split, bool with_roc) {
  const std::size_t n = ds.size();
  std::vector<int> predicted(n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = model.score(ds.features.row(i));
    predicted[i] = models::label_from_score(scores[i]);
  }

  CellResult cell;
  cell.model = model.name();
  cell.poison_fraction = fraction;
  cell.split = split;
  cell.confusion = metrics::confusion(ds.labels, predicted);
  cell.metric_set = metrics::compute_metrics(cell.confusion);
  if (with_roc) cell.roc = metrics::roc(ds.labels, scores);
  return cell;
}

}  // namespace

ExperimentResult run(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();

  PreparedData prepared = prepare_data(config);
  const data::Dataset& train = prepared.train;
  const data::Dataset& test = prepared.test;

  ExperimentResult result;
  result.config_fingerprint = config_fingerprint(config);
  result.canonical_config = canonical_items(config);
  result.preprocess = prepared.report;
  result.train_fingerprint = data::dataset_fingerprint(train);
  result.test_fingerprint = data::dataset_fingerprint(test);

  const std::size_t n_models = config.model_specs.size();
  const std::size_t n_fractions = config.poison_fractions.size();

  // All plans are drawn up front from pre-derived seeds, so neither the
  // worker count nor the grid order can change a single flip.
  std::vector<std::ptrdiff_t> plan_of_job(n_fractions * n_models, -1);
  for (std::size_t fi = 0; fi < n_fractions; ++fi) {
    const double fraction = config.poison_fractions[fi];
    if (fraction == 0.0) continue;
    const std::uint64_t fraction_seed =
        config.poison_mode == PoisonMode::kCumulative
            ? config.poison_seed
            : derive_seed(config.poison_seed, std::bit_cast<std::uint64_t>(fraction));
    if (config.per_model_plans) {
      for (std::size_t mi = 0; mi < n_models; ++mi) {
        const auto& name = config.model_specs[mi].name;
        const std::uint64_t model_seed = derive_seed(fraction_seed, fnv1a(name));
        plan_of_job[fi * n_models + mi] = static_cast<std::ptrdiff_t>(result.plans.size());
        result.plans.push_back({fraction, name, poison::plan_flips(train, fraction, model_seed)});
      }
    } else {
      const auto index = static_cast<std::ptrdiff_t>(result.plans.size());
      result.plans.push_back({fraction, "", poison::plan_flips(train, fraction, fraction_seed)});
      for (std::size_t mi = 0; mi < n_models; ++mi) plan_of_job[fi * n_models + mi] = index;
    }
  }

  const std::size_t n_jobs = n_fractions * n_models;
  result.grid.resize(n_jobs * 2);
  result.cell_seconds.assign(n_jobs * 2, 0.0);
  std::vector<char> done(n_jobs * 2, 0);

  const auto job = [&](std::size_t j) {
    const std::size_t fi = j / n_models;
    const std::size_t mi = j % n_models;
    const double fraction = config.poison_fractions[fi];
    const auto& spec = config.model_specs[mi];
    const std::size_t slot = j * 2;
    try {
      using clock = std::chrono::steady_clock;
      const auto t0 = clock::now();

      data::Dataset poisoned;
      const data::Dataset* fit_on = &train;
      if (plan_of_job[j] >= 0) {
        poisoned = poison::apply_flips(
            train, result.plans[static_cast<std::size_t>(plan_of_job[j])].plan, config.threat);
        fit_on = &poisoned;
      }
      const models::TrainedModel model = models::train(spec, *fit_on);

      // Train-split metrics are measured against the labels the model was
      // actually fitted on; with poison active those are the flipped ones.
      result.grid[slot] = evaluate_cell(model, *fit_on, fraction, SplitKind::kTrain, false);
      const auto t1 = clock::now();
      result.cell_seconds[slot] = std::chrono::duration<double>(t1 - t0).count();
      done[slot] = 1;

      if (data::dataset_fingerprint(test) != result.test_fingerprint) {
        throw HarnessError("test partition changed during the run");
      }
      result.grid[slot + 1] = evaluate_cell(model, test, fraction, SplitKind::kTest, true);
      result.cell_seconds[slot + 1] =
          std::chrono::duration<double>(clock::now() - t1).count();
      done[slot + 1] = 1;
    } catch (const std::exception& e) {
      throw HarnessError(fmt::format("cell (model {}, fraction {}, {}) failed: {}", spec.name,
                                     fraction, done[slot] ? "test" : "train", e.what()));
    }
  };

  try {
    parallel_for(n_jobs, options.workers, job);
  } catch (...) {
    ExperimentResult partial = result;
    partial.grid.clear();
    partial.cell_seconds.clear();
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
      if (done[i]) {
        partial.grid.push_back(result.grid[i]);
        partial.cell_seconds.push_back(result.cell_seconds[i]);
      }
    }
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    std::ofstream dump(config.output_dir / "partial_result.json");
    if (dump) dump << partial.to_json().dump(2) << '\n';
    throw;
  }

  return result;
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json plan_list = nlohmann::json::array();
  for (const auto& record : plans) {
    plan_list.push_back({{"fraction", record.fraction},
                         {"model", record.model},
                         {"plan", record.plan.to_json()}});
  }

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : grid) {
    nlohmann::json j = {{"model", cell.model},
                        {"fraction", cell.poison_fraction},
                        {"split", split_key(cell.split)},
                        {"metrics", cell.metric_set.to_json()},
                        {"confusion", cell.confusion.to_json()}};
    if (cell.roc) j["roc"] = cell.roc->to_json();
    cells.push_back(std::move(j));
  }

  return {{"config_fingerprint", config_fingerprint},
          {"config", canonical_config},
          {"preprocess", preprocess.to_json()},
          {"train_fingerprint", to_hex(train_fingerprint)},
          {"test_fingerprint", to_hex(test_fingerprint)},
          {"plans", plan_list},
          {"grid", cells}};
}

ExperimentResult ExperimentResult::from_json(const nlohmann::json& j) {
  ExperimentResult result;
  result.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  result.canonical_config = j.at("config").get<std::map<std::string, std::string>>();
  result.preprocess = data::PreprocessReport::from_json(j.at("preprocess"));
  result.train_fingerprint = std::stoull(j.at("train_fingerprint").get<std::string>(), nullptr, 16);
  result.test_fingerprint = std::stoull(j.at("test_fingerprint").get<std::string>(), nullptr, 16);
  for (const auto& record : j.at("plans")) {
    result.plans.push_back({record.at("fraction").get<double>(),
                            record.at("model").get<std::string>(),
                            poison::PoisonPlan::from_json(record.at("plan"))});
  }
  for (const auto& cell : j.at("grid")) {
    CellResult c;
    c.model = cell.at("model").get<std::string>();
    c.poison_fraction = cell.at("fraction").get<double>();
    c.split = split_from_key(cell.at("split").get<std::string>());
    c.metric_set = metrics::MetricSet::from_json(cell.at("metrics"));
    c.confusion = metrics::ConfusionMatrix::from_json(cell.at("confusion"));
    if (cell.contains("roc")) c.roc = metrics::RocCurve::from_json(cell.at("roc"));
    result.grid.push_back(std::move(c));
  }
  return result;
}

bool ComparisonReport::any_flagged() const {
  return std::any_of(deltas.begin(), deltas.end(),
                     [](const CellDelta& d) { return d.flagged; });
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& d : deltas) {
    rows.push_back({{"model", d.model},
                    {"fraction", d.fraction},
                    {"split", split_key(d.split)},
                    {"accuracy_pp", d.accuracy_pp},
                    {"precision_pp", d.precision_pp},
                    {"recall_pp", d.recall_pp},
                    {"f1_pp", d.f1_pp},
                    {"flagged", d.flagged}});
  }
  return {{"tolerance_pp", tolerance_pp}, {"any_flagged", any_flagged()}, {"deltas", rows}};
}

ComparisonReport compare_to_baseline(const ExperimentResult& result,
                                     const ExperimentResult& baseline,
                                     double tolerance_pp) {
  if (result.grid.size() != baseline.grid.size()) {
    throw GridMismatchError(fmt::format("grids differ in size: {} cells vs {} in the baseline",
                                        result.grid.size(), baseline.grid.size()));
  }

  ComparisonReport report;
  report.tolerance_pp = tolerance_pp;
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    const CellResult& a = result.grid[i];
    const CellResult& b = baseline.grid[i];
    if (a.model != b.model || a.poison_fraction != b.poison_fraction || a.split != b.split) {
      throw GridMismatchError(fmt::format(
          "cell {} differs: (model {}, fraction {}, {}) vs (model {}, fraction {}, {})", i,
          a.model, a.poison_fraction, split_key(a.split), b.model, b.poison_fraction,
          split_key(b.split)));
    }

    CellDelta d;
    d.model = a.model;
    d.fraction = a.poison_fraction;
    d.split = a.split;
    d.accuracy_pp = (a.metric_set.accuracy - b.metric_set.accuracy) * 100.0;
    d.precision_pp = (a.metric_set.precision - b.metric_set.precision) * 100.0;
    d.recall_pp = (a.metric_set.recall - b.metric_set.recall) * 100.0;
    d.f1_pp = (a.metric_set.f1 - b.metric_set.f1) * 100.0;
    const bool definedness_changed =
        a.metric_set.precision_undefined != b.metric_set.precision_undefined ||
        a.metric_set.recall_undefined != b.metric_set.recall_undefined ||
        a.metric_set.f1_undefined != b.metric_set.f1_undefined;
    d.flagged = definedness_changed || std::fabs(d.accuracy_pp) > tolerance_pp ||
                std::fabs(d.precision_pp) > tolerance_pp ||
                std::fabs(d.recall_pp) > tolerance_pp || std::fabs(d.f1_pp) > tolerance_pp;
    report.deltas.push_back(std::move(d));
  }
  return report;
}

}  // namespace poisonbench::harness
