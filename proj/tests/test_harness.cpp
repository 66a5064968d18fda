#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "poisonbench/errors.hpp"
#include "poisonbench/harness.hpp"
#include "poisonbench/models.hpp"
#include "test_util.hpp"

using namespace poisonbench;
using namespace poisonbench::harness;

namespace {

ExperimentConfig small_config() {
  data::SyntheticSpec synth;
  synth.n_per_class = {20, 20};
  synth.seed = 7;

  ExperimentConfig config;
  config.source = synth;
  config.model_specs = {
      models::ModelSpec::with_defaults(models::ModelFamily::kDecisionTree, 1),
      models::ModelSpec::with_defaults(models::ModelFamily::kSgdLinear, 2)};
  config.poison_fractions = {0.0, 0.1, 0.2};
  config.poison_seed = 99;
  return config;
}

std::set<std::size_t> flip_rows(const poison::PoisonPlan& plan) {
  std::set<std::size_t> rows;
  for (const auto& flip : plan.flips) rows.insert(flip.row);
  return rows;
}

const PlanRecord& plan_for(const ExperimentResult& result, double fraction) {
  for (const auto& record : result.plans) {
    if (record.fraction == fraction) return record;
  }
  REQUIRE(false);
  return result.plans.front();
}

}  // namespace

TEST_CASE("config fingerprint ignores execution-only knobs") {
  ExperimentConfig a = small_config();
  ExperimentConfig b = small_config();
  b.output_dir = "somewhere/else";
  CHECK(config_fingerprint(a) == config_fingerprint(b));

  ExperimentConfig c = small_config();
  c.model_specs[1].params = models::SgdLinearParams{0.02, 1e-4, 20};
  CHECK(config_fingerprint(a) != config_fingerprint(c));

  ExperimentConfig d = small_config();
  d.poison_fractions = {0.0, 0.1};
  CHECK(config_fingerprint(a) != config_fingerprint(d));

  ExperimentConfig e = small_config();
  e.poison_seed = 100;
  CHECK(config_fingerprint(a) != config_fingerprint(e));
}

TEST_CASE("canonical items spell out the whole experiment") {
  const auto items = canonical_items(small_config());
  CHECK(items.at("data.source") == "synthetic");
  CHECK(items.at("synthetic.n0") == "20");
  CHECK(items.at("split.train_fraction") == "0.85");
  CHECK(items.at("preprocess.mode") == "faithful");
  CHECK(items.at("models") == "tree,sgd");
  CHECK(items.at("models.tree.family") == "tree");
  CHECK(items.at("models.sgd.learning_rate") == "0.01");
  CHECK(items.at("poison.fractions") == "0,0.1,0.2");
  CHECK(items.at("poison.mode") == "independent");
  CHECK(items.at("threat.capability") == "data_modification");
  CHECK(items.count("output.dir") == 0);
}

TEST_CASE("config validation rejects malformed experiments") {
  ExperimentConfig ok = small_config();
  CHECK_NOTHROW(ok.validate());

  ExperimentConfig no_baseline = small_config();
  no_baseline.poison_fractions = {0.1, 0.2};
  CHECK_THROWS_AS(no_baseline.validate(), ConfigError);

  ExperimentConfig unsorted = small_config();
  unsorted.poison_fractions = {0.0, 0.2, 0.1};
  CHECK_THROWS_AS(unsorted.validate(), ConfigError);

  ExperimentConfig out_of_range = small_config();
  out_of_range.poison_fractions = {0.0, 1.5};
  CHECK_THROWS_AS(out_of_range.validate(), ConfigError);

  ExperimentConfig duplicate_names = small_config();
  duplicate_names.model_specs[1].name = duplicate_names.model_specs[0].name;
  CHECK_THROWS_AS(duplicate_names.validate(), ConfigError);

  ExperimentConfig no_models = small_config();
  no_models.model_specs.clear();
  CHECK_THROWS_AS(no_models.validate(), ConfigError);

  ExperimentConfig bad_split = small_config();
  bad_split.split.train_fraction = 1.0;
  CHECK_THROWS_AS(bad_split.validate(), ConfigError);

  ExperimentConfig bad_params = small_config();
  bad_params.model_specs[0].params = models::DecisionTreeParams{-1, 1};
  CHECK_THROWS_AS(bad_params.validate(), ConfigError);

  ExperimentConfig bad_threshold = small_config();
  bad_threshold.missing_row_threshold = 1.5;
  CHECK_THROWS_AS(bad_threshold.validate(), ConfigError);
}

TEST_CASE("the grid is fraction-major with train before test") {
  const ExperimentConfig config = small_config();
  const ExperimentResult result = run(config, RunOptions{1});

  const std::size_t n_models = config.model_specs.size();
  REQUIRE(result.grid.size() == 3 * n_models * 2);
  REQUIRE(result.cell_seconds.size() == result.grid.size());
  for (std::size_t fi = 0; fi < 3; ++fi) {
    for (std::size_t mi = 0; mi < n_models; ++mi) {
      for (std::size_t s = 0; s < 2; ++s) {
        const CellResult& cell = result.grid[(fi * n_models + mi) * 2 + s];
        CHECK(cell.model == config.model_specs[mi].name);
        CHECK(cell.poison_fraction == config.poison_fractions[fi]);
        CHECK(cell.split == (s == 0 ? SplitKind::kTrain : SplitKind::kTest));
        CHECK(cell.roc.has_value() == (s == 1));
        CHECK(cell.confusion.total() > 0);
      }
    }
  }

  // Shared plans: one per nonzero fraction, not tagged with a model.
  REQUIRE(result.plans.size() == 2);
  CHECK(result.plans[0].fraction == 0.1);
  CHECK(result.plans[1].fraction == 0.2);
  CHECK(result.plans[0].model.empty());
  CHECK(result.train_fingerprint != 0);
  CHECK(result.test_fingerprint != 0);
}

TEST_CASE("worker count cannot change a single byte of the result") {
  const ExperimentConfig config = small_config();
  const ExperimentResult sequential = run(config, RunOptions{1});
  const ExperimentResult parallel = run(config, RunOptions{4});
  CHECK(sequential.to_json().dump(2) == parallel.to_json().dump(2));
}

TEST_CASE("cumulative mode nests smaller fractions inside larger ones") {
  ExperimentConfig config = small_config();
  config.poison_mode = PoisonMode::kCumulative;
  const ExperimentResult result = run(config, RunOptions{1});

  const auto small = flip_rows(plan_for(result, 0.1).plan);
  const auto large = flip_rows(plan_for(result, 0.2).plan);
  CHECK(small.size() < large.size());
  for (std::size_t row : small) CHECK(large.count(row) == 1);
}

TEST_CASE("independent mode draws each fraction from its own stream") {
  ExperimentConfig two = small_config();
  two.poison_fractions = {0.0, 0.2};
  ExperimentConfig three = small_config();
  three.poison_fractions = {0.0, 0.1, 0.2};

  const ExperimentResult r2 = run(two, RunOptions{1});
  const ExperimentResult r3 = run(three, RunOptions{1});

  // The 0.2 plan depends only on the poison seed and the fraction, so the
  // surrounding fraction list is irrelevant.
  CHECK(plan_for(r2, 0.2).plan == plan_for(r3, 0.2).plan);
  CHECK(r2.test_fingerprint == r3.test_fingerprint);
  CHECK(r2.train_fingerprint == r3.train_fingerprint);
}

TEST_CASE("per-model plans give every model its own draw") {
  ExperimentConfig config = small_config();
  config.per_model_plans = true;
  const ExperimentResult result = run(config, RunOptions{1});

  REQUIRE(result.plans.size() == 2 * 2);  // (fractions - baseline) x models
  std::set<std::pair<double, std::string>> seen;
  for (const auto& record : result.plans) {
    CHECK_FALSE(record.model.empty());
    seen.insert({record.fraction, record.model});
  }
  CHECK(seen.size() == 4);

  const auto& tree_plan = result.plans[0];
  const auto& sgd_plan = result.plans[1];
  CHECK(tree_plan.fraction == sgd_plan.fraction);
  CHECK_FALSE(tree_plan.plan == sgd_plan.plan);
}

TEST_CASE("train metrics are measured against the labels the model saw") {
  ExperimentConfig config = small_config();
  config.model_specs = {models::ModelSpec::with_defaults(models::ModelFamily::kDecisionTree, 1)};
  config.poison_fractions = {0.0, 0.5};
  const ExperimentResult result = run(config, RunOptions{1});

  // A fully grown tree reproduces whatever labels it was fitted on, poisoned
  // or not, so its train-split accuracy stays at 1.0 even at half flips.
  const CellResult& clean_train = result.grid[0];
  const CellResult& poisoned_train = result.grid[2];
  CHECK(clean_train.poison_fraction == 0.0);
  CHECK(poisoned_train.poison_fraction == 0.5);
  CHECK(clean_train.metric_set.accuracy == 1.0);
  CHECK(poisoned_train.metric_set.accuracy == 1.0);

  // The test side tells the real story: half the training labels were lies.
  const CellResult& poisoned_test = result.grid[3];
  CHECK(poisoned_test.metric_set.accuracy < 1.0);
}

TEST_CASE("experiment results round-trip through json byte-stably") {
  const ExperimentResult result = run(small_config(), RunOptions{1});
  const std::string first = result.to_json().dump(2);
  const ExperimentResult back = ExperimentResult::from_json(nlohmann::json::parse(first));
  CHECK(back.to_json().dump(2) == first);
}

TEST_CASE("emit_report writes the same bytes for the same result") {
  const ExperimentResult result = run(small_config(), RunOptions{1});
  const std::set<ReportFormat> formats = {ReportFormat::kJson, ReportFormat::kCsv,
                                          ReportFormat::kMarkdown, ReportFormat::kRocPoints};
  testutil::TempDir dir_a("pb_rep_a");
  testutil::TempDir dir_b("pb_rep_b");
  const auto paths_a = emit_report(result, formats, dir_a.path());
  const auto paths_b = emit_report(result, formats, dir_b.path());

  REQUIRE(paths_a.size() == paths_b.size());
  CHECK(std::is_sorted(paths_a.begin(), paths_a.end()));

  std::set<std::string> names;
  for (std::size_t i = 0; i < paths_a.size(); ++i) {
    names.insert(paths_a[i].filename().string());
    CHECK(paths_a[i].filename() == paths_b[i].filename());
    CHECK(testutil::read_file(paths_a[i]) == testutil::read_file(paths_b[i]));
    CHECK(std::filesystem::file_size(paths_a[i]) > 0);
  }
  CHECK(names.count("result.json") == 1);
  CHECK(names.count("provenance.json") == 1);
  CHECK(names.count("report.md") == 1);
  CHECK(names.count("metrics_0.1.csv") == 1);
  CHECK(names.count("confusion_0.2.csv") == 1);
  CHECK(names.count("tree_0.1.roc") == 1);
  CHECK(names.count("sgd_0.roc") == 1);
}

TEST_CASE("comparison flags cells that drift past the tolerance") {
  const ExperimentResult baseline = run(small_config(), RunOptions{1});

  SUBCASE("a result compared to itself is clean") {
    const ComparisonReport report = compare_to_baseline(baseline, baseline, 0.0);
    CHECK_FALSE(report.any_flagged());
    REQUIRE(report.deltas.size() == baseline.grid.size());
    for (const auto& d : report.deltas) {
      CHECK(d.accuracy_pp == 0.0);
      CHECK(d.f1_pp == 0.0);
    }
  }

  SUBCASE("a metric shift registers in percentage points") {
    ExperimentResult drifted = baseline;
    drifted.grid[4].metric_set.accuracy += 0.011;
    const ComparisonReport tight = compare_to_baseline(drifted, baseline, 0.5);
    CHECK(tight.any_flagged());
    CHECK(tight.deltas[4].flagged);
    CHECK(tight.deltas[4].accuracy_pp == doctest::Approx(1.1));
    const ComparisonReport loose = compare_to_baseline(drifted, baseline, 2.0);
    CHECK_FALSE(loose.any_flagged());
  }

  SUBCASE("a definedness change is flagged at any tolerance") {
    ExperimentResult drifted = baseline;
    drifted.grid[1].metric_set.precision_undefined =
        !drifted.grid[1].metric_set.precision_undefined;
    const ComparisonReport report = compare_to_baseline(drifted, baseline, 1e9);
    CHECK(report.any_flagged());
    CHECK(report.deltas[1].flagged);
  }

  SUBCASE("misaligned grids are an error, not a diff") {
    ExperimentResult truncated = baseline;
    truncated.grid.pop_back();
    CHECK_THROWS_AS(compare_to_baseline(truncated, baseline, 0.5), GridMismatchError);

    ExperimentResult reordered = baseline;
    std::swap(reordered.grid[0], reordered.grid[2]);
    CHECK_THROWS_AS(compare_to_baseline(reordered, baseline, 0.5), GridMismatchError);
  }
}

TEST_CASE("a failing cell dumps the completed cells before rethrowing") {
  testutil::TempDir dir("pb_partial");
  ExperimentConfig config = small_config();
  config.output_dir = dir.path();
  config.poison_fractions = {0.0};
  auto big_k = models::ModelSpec::with_defaults(models::ModelFamily::kKnn, 3);
  big_k.params = models::KnnParams{99};  // valid spec, impossible on 34 rows
  config.model_specs = {models::ModelSpec::with_defaults(models::ModelFamily::kDecisionTree, 1),
                        big_k};

  try {
    run(config, RunOptions{1});
    FAIL("expected HarnessError");
  } catch (const HarnessError& e) {
    CHECK(std::string(e.what()).find("knn") != std::string::npos);
  }

  const auto dump_path = dir.file("partial_result.json");
  REQUIRE(std::filesystem::exists(dump_path));
  const ExperimentResult partial = ExperimentResult::from_json(
      nlohmann::json::parse(testutil::read_file(dump_path)));
  REQUIRE(partial.grid.size() == 2);  // the tree job finished both splits
  for (const auto& cell : partial.grid) CHECK(cell.model == "tree");
}

TEST_CASE("non-executable threats stop poisoned runs but not clean ones") {
  testutil::TempDir dir("pb_threat");
  ExperimentConfig config = small_config();
  config.output_dir = dir.path();
  config.threat.knowledge = poison::AttackerKnowledge::kWhiteBox;

  ExperimentConfig clean_only = config;
  clean_only.poison_fractions = {0.0};
  CHECK_NOTHROW(run(clean_only, RunOptions{1}));

  CHECK_THROWS_AS(run(config, RunOptions{1}), HarnessError);
}
