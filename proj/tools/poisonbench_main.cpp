// Command-line front end: run experiments, synthesize datasets, regenerate
// reports, compare results, and inspect configs. Exit codes: 0 success,
// 1 comparison found drift, 2 bad config or usage, 3 data problem,
// 4 training/evaluation failure.

#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "poisonbench/config.hpp"
#include "poisonbench/dataset.hpp"
#include "poisonbench/errors.hpp"
#include "poisonbench/harness.hpp"

namespace {

using namespace poisonbench;

cfg::FullConfig assemble_config(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (!config_path.empty()) entries = cfg::parse_kv_file(config_path);
  for (const auto& item : overrides) entries.push_back(cfg::parse_override(item));
  return cfg::build_config(entries);
}

harness::ExperimentResult load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(fmt::format("cannot open {}", path));
  try {
    nlohmann::json j;
    in >> j;
    return harness::ExperimentResult::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{} is not a valid result file: {}", path, e.what()));
  }
}

int do_run(const std::string& config_path, const std::vector<std::string>& overrides,
           bool as_json) {
  const cfg::FullConfig config = assemble_config(config_path, overrides);
  fmt::print(stderr, "running experiment {} ({} models x {} fractions)\n",
             harness::config_fingerprint(config.experiment), config.experiment.model_specs.size(),
             config.experiment.poison_fractions.size());

  const harness::ExperimentResult result =
      harness::run(config.experiment, {.workers = config.workers});
  const auto written =
      harness::emit_report(result, config.formats, config.experiment.output_dir);

  if (as_json) {
    fmt::print("{}\n", result.to_json().dump(2));
  } else {
    fmt::print("config {}\n", result.config_fingerprint);
    for (const auto& path : written) fmt::print("wrote {}\n", path.string());
  }
  return 0;
}

int do_synth(const std::string& out_path, data::SyntheticSpec spec, bool dim_given,
             bool mean0_given, bool mean1_given) {
  if (dim_given) {
    if (!mean0_given) spec.class_means[0].assign(spec.dimension, 0.0);
    if (!mean1_given) spec.class_means[1].assign(spec.dimension, 10.0);
  }
  const data::Dataset ds = data::generate_synthetic(spec);
  data::save_dataset(ds, out_path);
  fmt::print("wrote {} ({} rows, {} features)\n", out_path, ds.size(), ds.dim());
  return 0;
}

int do_report(const std::string& result_path, const std::string& out_dir,
              const std::string& formats) {
  const harness::ExperimentResult result = load_result(result_path);
  const auto written = harness::emit_report(result, cfg::parse_formats(formats), out_dir);
  for (const auto& path : written) fmt::print("wrote {}\n", path.string());
  return 0;
}

int do_compare(const std::string& result_path, const std::string& baseline_path,
               double tolerance_pp, bool as_json) {
  const auto result = load_result(result_path);
  const auto baseline = load_result(baseline_path);
  const auto report = harness::compare_to_baseline(result, baseline, tolerance_pp);

  if (as_json) {
    fmt::print("{}\n", report.to_json().dump(2));
  } else {
    for (const auto& d : report.deltas) {
      if (!d.flagged) continue;
      fmt::print("FLAGGED model {} fraction {:g} {}: accuracy {:+.2f}pp precision {:+.2f}pp "
                 "recall {:+.2f}pp f1 {:+.2f}pp\n",
                 d.model, d.fraction, d.split == harness::SplitKind::kTrain ? "train" : "test",
                 d.accuracy_pp, d.precision_pp, d.recall_pp, d.f1_pp);
    }
    fmt::print("{} of {} cells moved more than {:g}pp\n",
               std::count_if(report.deltas.begin(), report.deltas.end(),
                             [](const harness::CellDelta& d) { return d.flagged; }),
               report.deltas.size(), tolerance_pp);
  }
  return report.any_flagged() ? 1 : 0;
}

int do_validate(const std::string& config_path, const std::vector<std::string>& overrides) {
  const cfg::FullConfig config = assemble_config(config_path, overrides);
  for (const auto& [key, value] : cfg::normalized_items(config)) {
    fmt::print("{} = {}\n", key, value);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stratified label-flip poisoning benchmark for malware classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool as_json = false;

  auto* run_cmd = app.add_subcommand("run", "train, poison, retrain and evaluate the grid");
  run_cmd->add_option("--config", config_path, "key = value config file");
  run_cmd->add_option("--set", overrides, "override one config key (key=value, repeatable)");
  run_cmd->add_flag("--json", as_json, "print the full result JSON to stdout");

  std::string out_path = "synthetic.csv";
  data::SyntheticSpec synth_spec;
  int synth_n0 = 500;
  int synth_n1 = 500;
  int synth_dim = 2;
  auto* synth_cmd = app.add_subcommand("synth", "write a two-blob synthetic dataset as CSV");
  synth_cmd->add_option("--out", out_path, "output CSV path");
  synth_cmd->add_option("--n0", synth_n0, "rows in the malware blob");
  synth_cmd->add_option("--n1", synth_n1, "rows in the benign blob");
  auto* dim_opt = synth_cmd->add_option("--dim", synth_dim, "feature count");
  auto* mean0_opt = synth_cmd->add_option("--mean0", synth_spec.class_means[0], "malware blob center")
                        ->delimiter(',');
  auto* mean1_opt = synth_cmd->add_option("--mean1", synth_spec.class_means[1], "benign blob center")
                        ->delimiter(',');
  synth_cmd->add_option("--noise", synth_spec.noise_scale, "gaussian noise scale");
  synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");

  std::string result_path;
  std::string report_dir = "out";
  std::string report_formats = "json,csv,markdown,roc_points";
  auto* report_cmd = app.add_subcommand("report", "regenerate report files from a result.json");
  report_cmd->add_option("--result", result_path, "result.json to read")->required();
  report_cmd->add_option("--out", report_dir, "directory to write into");
  report_cmd->add_option("--formats", report_formats, "comma list: json,csv,markdown,roc_points");

  std::string baseline_path;
  double tolerance_pp = 0.5;
  auto* compare_cmd = app.add_subcommand("compare", "diff two results cell by cell");
  compare_cmd->add_option("--result", result_path, "result.json to check")->required();
  compare_cmd->add_option("--baseline", baseline_path, "result.json to compare against")
      ->required();
  compare_cmd->add_option("--tolerance-pp", tolerance_pp,
                          "flag any metric moving more than this many percentage points");
  compare_cmd->add_flag("--json", as_json, "print the comparison as JSON");

  auto* validate_cmd =
      app.add_subcommand("validate-config", "print the fully merged config and exit");
  validate_cmd->add_option("--config", config_path, "key = value config file");
  validate_cmd->add_option("--set", overrides, "override one config key (key=value, repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return do_run(config_path, overrides, as_json);
    if (synth_cmd->parsed()) {
      if (synth_n0 < 0 || synth_n1 < 0 || synth_dim < 1) {
        throw ConfigError("synth: sizes must be nonnegative and --dim at least 1");
      }
      synth_spec.n_per_class = {static_cast<std::size_t>(synth_n0),
                                static_cast<std::size_t>(synth_n1)};
      synth_spec.dimension = static_cast<std::size_t>(synth_dim);
      return do_synth(out_path, synth_spec, dim_opt->count() > 0, mean0_opt->count() > 0,
                      mean1_opt->count() > 0);
    }
    if (report_cmd->parsed()) return do_report(result_path, report_dir, report_formats);
    if (compare_cmd->parsed()) {
      return do_compare(result_path, baseline_path, tolerance_pp, as_json);
    }
    if (validate_cmd->parsed()) return do_validate(config_path, overrides);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const GridMismatchError& e) {
    fmt::print(stderr, "comparison error: {}\n", e.what());
    return 2;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 3;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 4;
  }
  return 0;
}
