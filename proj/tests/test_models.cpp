#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "poisonbench/dataset.hpp"
#include "poisonbench/errors.hpp"
#include "poisonbench/models.hpp"
#include "poisonbench/rng.hpp"
#include "test_util.hpp"

using namespace poisonbench;
using namespace poisonbench::models;

namespace {

data::Dataset separable_blobs(std::size_t per_class = 60, std::uint64_t seed = 7) {
  data::SyntheticSpec spec;
  spec.n_per_class = {per_class, per_class};
  spec.seed = seed;
  return data::generate_synthetic(spec);
}

double training_accuracy(const TrainedModel& model, const data::Dataset& ds) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (model.predict(ds.features.row(r)) == ds.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

data::Dataset random_dataset(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (auto& v : row) v = rng.next_double();
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(rng.next_below(2)));
  }
  if (n >= 2) {
    labels[0] = 0;
    labels[n - 1] = 1;
  }
  return testutil::make_dataset(rows, labels);
}

}  // namespace

TEST_CASE("label_from_score thresholds at one half, malware on ties") {
  CHECK(label_from_score(0.5) == 0);
  CHECK(label_from_score(0.51) == 0);
  CHECK(label_from_score(1.0) == 0);
  CHECK(label_from_score(0.49) == 1);
  CHECK(label_from_score(0.0) == 1);
}

TEST_CASE("family keys and display names cover all eight families") {
  std::set<std::string> keys;
  for (ModelFamily f : kAllFamilies) {
    const std::string key = family_key(f);
    CHECK_FALSE(key.empty());
    CHECK(keys.insert(key).second);
    REQUIRE(family_from_key(key).has_value());
    CHECK(*family_from_key(key) == f);
    CHECK_FALSE(std::string(family_display_name(f)).empty());
  }
  CHECK(keys.size() == 8);
  CHECK_FALSE(family_from_key("bogus").has_value());
}

TEST_CASE("every family separates clean blobs") {
  // 250 rows per class: the mlp sees 50 epochs x 8 batches, enough to pull the
  // sigmoid head away from its 0.5 initialisation on every run.
  const data::Dataset ds = separable_blobs(250);
  for (ModelFamily f : kAllFamilies) {
    const std::string family = family_key(f);
    CAPTURE(family);
    const ModelSpec spec = ModelSpec::with_defaults(f, 1);
    CHECK(spec.name == family_key(f));
    const TrainedModel model = train(spec, ds);
    CHECK(training_accuracy(model, ds) >= 0.9);
    CHECK(model.dimension() == ds.dim());

    // predict is the thresholded score, by construction
    for (std::size_t r = 0; r < 5; ++r) {
      const auto x = ds.features.row(r);
      const double s = model.score(x);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      CHECK(model.predict(x) == label_from_score(s));
    }
  }
}

TEST_CASE("training is bit-deterministic given spec and data") {
  const data::Dataset ds = separable_blobs(40, 3);
  for (ModelFamily f : kAllFamilies) {
    const std::string family = family_key(f);
    CAPTURE(family);
    const ModelSpec spec = ModelSpec::with_defaults(f, 5);
    const TrainedModel a = train(spec, ds);
    const TrainedModel b = train(spec, ds);
    CHECK(a.classifier().params_to_json().dump() == b.classifier().params_to_json().dump());
    CHECK(a.training_fingerprint() == b.training_fingerprint());
  }
}

TEST_CASE("stochastic families react to the seed") {
  const data::Dataset ds = separable_blobs(40, 3);
  for (ModelFamily f : {ModelFamily::kRandomForest, ModelFamily::kMlp}) {
    const std::string family = family_key(f);
    CAPTURE(family);
    const TrainedModel a = train(ModelSpec::with_defaults(f, 5), ds);
    const TrainedModel b = train(ModelSpec::with_defaults(f, 6), ds);
    CHECK(a.classifier().params_to_json().dump() != b.classifier().params_to_json().dump());
  }
}

TEST_CASE("single-class training data is rejected except for knn") {
  const data::Dataset malware_only =
      testutil::make_dataset({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}}, {0, 0, 0});
  for (ModelFamily f : kAllFamilies) {
    const std::string family = family_key(f);
    CAPTURE(family);
    const ModelSpec spec = ModelSpec::with_defaults(f, 1);
    if (f == ModelFamily::kKnn) {
      ModelSpec knn_spec = spec;
      knn_spec.params = KnnParams{3};
      const TrainedModel model = train(knn_spec, malware_only);
      CHECK(model.predict(malware_only.features.row(0)) == 0);
      CHECK(model.score(malware_only.features.row(0)) == 1.0);
    } else {
      CHECK_THROWS_AS(train(spec, malware_only), SingleClassTrainingError);
    }
  }

  const data::Dataset empty = testutil::make_dataset({}, {});
  CHECK_THROWS_AS(train(ModelSpec::with_defaults(ModelFamily::kKnn, 1), empty),
                  SingleClassTrainingError);
  CHECK_THROWS_AS(train(ModelSpec::with_defaults(ModelFamily::kDecisionTree, 1), empty),
                  SingleClassTrainingError);
}

TEST_CASE("knn requires enough training rows and an odd k") {
  const data::Dataset three =
      testutil::make_dataset({{0.0}, {1.0}, {2.0}}, {0, 1, 0});
  ModelSpec spec = ModelSpec::with_defaults(ModelFamily::kKnn, 1);  // k = 5
  CHECK_THROWS_AS(train(spec, three), InvalidHyperparamsError);

  spec.params = KnnParams{4};
  CHECK_THROWS_AS(spec.validate(), InvalidHyperparamsError);
  spec.params = KnnParams{0};
  CHECK_THROWS_AS(spec.validate(), InvalidHyperparamsError);
}

TEST_CASE("knn matches the brute-force reference on random data") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.next_below(181);
    const std::size_t d = 1 + rng.next_below(10);
    const data::Dataset train_set = random_dataset(n, d, rng);
    for (int k : {1, 3, 5}) {
      ModelSpec spec = ModelSpec::with_defaults(ModelFamily::kKnn, 1);
      spec.params = KnnParams{k};
      const TrainedModel model = train(spec, train_set);

      for (int p = 0; p < 20; ++p) {
        std::vector<double> probe(d);
        for (auto& v : probe) v = rng.next_double();
        CHECK(model.predict(probe) == knn_brute_oracle(train_set, probe, k));
      }
      // Training rows probe the zero-distance edge.
      for (std::size_t r = 0; r < std::min<std::size_t>(10, n); ++r) {
        const auto x = train_set.features.row(r);
        CHECK(model.predict(x) == knn_brute_oracle(train_set, x, k));
      }
    }
  }
}

TEST_CASE("knn distance ties go to the lower training row index") {
  const data::Dataset train_set =
      testutil::make_dataset({{0.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}}, {0, 1, 1});
  ModelSpec spec = ModelSpec::with_defaults(ModelFamily::kKnn, 1);
  spec.params = KnnParams{1};
  const TrainedModel nn1 = train(spec, train_set);

  // (1,0) is exactly between rows 0 and 1; row 0 wins and it is malware.
  const std::vector<double> between = {1.0, 0.0};
  CHECK(nn1.score(between) == 1.0);
  CHECK(nn1.predict(between) == 0);
  CHECK(knn_brute_oracle(train_set, between, 1) == 0);

  spec.params = KnnParams{3};
  const TrainedModel nn3 = train(spec, train_set);
  const std::vector<double> center = {1.0, 1.0};  // equidistant from all three
  CHECK(nn3.score(center) == doctest::Approx(1.0 / 3.0));
  CHECK(nn3.predict(center) == 1);
  CHECK(knn_brute_oracle(train_set, center, 3) == 1);
}

TEST_CASE("decision tree fits consistent data exactly") {
  SUBCASE("xor needs two levels") {
    const data::Dataset xor_set = testutil::make_dataset(
        {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}, {0, 1, 1, 0});
    const TrainedModel tree = train(ModelSpec::with_defaults(ModelFamily::kDecisionTree, 1), xor_set);
    CHECK(training_accuracy(tree, xor_set) == 1.0);
  }
  SUBCASE("random conflict-free rows") {
    Rng rng(47);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
      // Distinct first coordinate guarantees no conflicting duplicates.
      rows.push_back({static_cast<double>(i), rng.next_double()});
      labels.push_back(static_cast<int>(rng.next_below(2)));
    }
    labels[0] = 0;
    labels[1] = 1;
    const data::Dataset ds = testutil::make_dataset(rows, labels);
    const TrainedModel tree = train(ModelSpec::with_defaults(ModelFamily::kDecisionTree, 1), ds);
    CHECK(training_accuracy(tree, ds) == 1.0);
  }
}

TEST_CASE("a depth-one stump cannot express xor") {
  const data::Dataset xor_set = testutil::make_dataset(
      {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}, {0, 1, 1, 0});
  ModelSpec spec = ModelSpec::with_defaults(ModelFamily::kDecisionTree, 1);
  spec.params = DecisionTreeParams{1, 1};
  const TrainedModel stump = train(spec, xor_set);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(stump.score(xor_set.features.row(r)) == 0.5);  // both leaves stay mixed
  }
  CHECK(training_accuracy(stump, xor_set) == 0.5);
}

TEST_CASE("random forest averages its trees") {
  const data::Dataset ds = separable_blobs(30, 11);
  ModelSpec spec = ModelSpec::with_defaults(ModelFamily::kRandomForest, 3);
  spec.params = RandomForestParams{7, true, 0, DecisionTreeParams{}};
  const TrainedModel forest = train(spec, ds);

  const auto& impl = dynamic_cast<const RandomForestClassifier&>(forest.classifier());
  REQUIRE(impl.trees().size() == 7);
  for (std::size_t r = 0; r < 10; ++r) {
    const auto x = ds.features.row(r);
    double mean = 0.0;
    for (const auto& tree : impl.trees()) mean += tree.score_one(x);
    mean /= 7.0;
    CHECK(forest.score(x) == mean);
  }
}

TEST_CASE("analytic gradients agree with central differences") {
  Rng rng(103);
  const data::Dataset batch = random_dataset(32, 4, rng);

  ModelSpec mlp_spec = ModelSpec::with_defaults(ModelFamily::kMlp, 9);
  mlp_spec.params = MlpParams{8, 16, 0.01, 5};
  CHECK(mlp_gradient_check(mlp_spec, batch) < 1e-4);

  const ModelSpec logreg_spec = ModelSpec::with_defaults(ModelFamily::kLogisticRegression, 9);
  CHECK(mlp_gradient_check(logreg_spec, batch) < 1e-4);

  const ModelSpec tree_spec = ModelSpec::with_defaults(ModelFamily::kDecisionTree, 9);
  CHECK_THROWS_AS(mlp_gradient_check(tree_spec, batch), InvalidHyperparamsError);
}

TEST_CASE("runaway learning rates raise a divergence error") {
  const data::Dataset ds = separable_blobs(50, 13);

  ModelSpec logreg_spec = ModelSpec::with_defaults(ModelFamily::kLogisticRegression, 1);
  logreg_spec.params = LogisticRegressionParams{1e12, 1e-4, 200};
  CHECK_THROWS_AS(train(logreg_spec, ds), NonFiniteLossError);

  // Moderately huge rates can strand the mlp in an all-dead relu layer where the
  // only moving parameter is the output bias, which never overflows. The rate has
  // to be large enough that one surviving unit blows past the double range.
  ModelSpec mlp_spec = ModelSpec::with_defaults(ModelFamily::kMlp, 1);
  mlp_spec.params = MlpParams{16, 32, 1e155, 50};
  CHECK_THROWS_AS(train(mlp_spec, ds), NonFiniteLossError);
}

TEST_CASE("trained models round-trip through json with identical scores") {
  const data::Dataset ds = separable_blobs(25, 5);
  Rng rng(71);
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 10; ++i) {
    probes.push_back({rng.next_double(), rng.next_double()});
  }

  for (ModelFamily f : kAllFamilies) {
    const std::string family = family_key(f);
    CAPTURE(family);
    ModelSpec spec = ModelSpec::with_defaults(f, 2);
    if (f == ModelFamily::kRandomForest) {
      spec.params = RandomForestParams{10, true, 0, DecisionTreeParams{}};  // keep json small
    }
    const TrainedModel model = train(spec, ds);
    const TrainedModel back = TrainedModel::from_json(model.to_json());

    CHECK(back.name() == model.name());
    CHECK(back.spec().family == model.spec().family);
    CHECK(back.spec().seed == model.spec().seed);
    CHECK(back.dimension() == model.dimension());
    CHECK(back.training_fingerprint() == model.training_fingerprint());
    for (const auto& probe : probes) {
      CHECK(back.score(probe) == model.score(probe));
    }
    CHECK(back.to_json() == model.to_json());
  }
}

TEST_CASE("scoring rejects probes of the wrong width") {
  const data::Dataset ds = separable_blobs(20, 5);
  const TrainedModel model = train(ModelSpec::with_defaults(ModelFamily::kSgdLinear, 1), ds);
  const std::vector<double> wide = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(model.score(wide), DimensionMismatchError);
  const std::vector<double> narrow = {0.1};
  CHECK_THROWS_AS(model.predict(narrow), DimensionMismatchError);
}

TEST_CASE("hyperparameter validation rejects out-of-range values") {
  const auto expect_invalid = [](ModelFamily family, Hyperparams params) {
    ModelSpec spec = ModelSpec::with_defaults(family, 1);
    spec.params = std::move(params);
    CHECK_THROWS_AS(spec.validate(), InvalidHyperparamsError);
  };
  expect_invalid(ModelFamily::kSgdLinear, SgdLinearParams{0.0, 1e-4, 20});
  expect_invalid(ModelFamily::kSgdLinear, SgdLinearParams{0.01, -1.0, 20});
  expect_invalid(ModelFamily::kSgdLinear, SgdLinearParams{0.01, 1e-4, 0});
  expect_invalid(ModelFamily::kDecisionTree, DecisionTreeParams{-1, 1});
  expect_invalid(ModelFamily::kDecisionTree, DecisionTreeParams{0, 0});
  expect_invalid(ModelFamily::kRandomForest, RandomForestParams{0, true, 0, {}});
  expect_invalid(ModelFamily::kRandomForest, RandomForestParams{10, true, -1, {}});
  expect_invalid(ModelFamily::kLogisticRegression, LogisticRegressionParams{0.1, 1e-4, 0});
  expect_invalid(ModelFamily::kKnn, KnnParams{2});
  expect_invalid(ModelFamily::kLinearSvm, LinearSvmParams{0.0, 20});
  expect_invalid(ModelFamily::kPerceptron, PerceptronParams{1.0, -5});
  expect_invalid(ModelFamily::kMlp, MlpParams{0, 64, 0.01, 50});
  expect_invalid(ModelFamily::kMlp, MlpParams{100, 0, 0.01, 50});

  // A spec whose params variant does not match its family is invalid too.
  ModelSpec mismatched = ModelSpec::with_defaults(ModelFamily::kKnn, 1);
  mismatched.params = SgdLinearParams{};
  CHECK_THROWS_AS(mismatched.validate(), InvalidHyperparamsError);
}
