#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "poisonbench/dataset.hpp"
#include "poisonbench/errors.hpp"
#include "poisonbench/poison.hpp"
#include "poisonbench/rng.hpp"
#include "test_util.hpp"

using namespace poisonbench;
using namespace poisonbench::poison;

namespace {

data::Dataset random_labeled_dataset(std::size_t n, Rng& rng) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({rng.next_double(), rng.next_double()});
    labels.push_back(static_cast<int>(rng.next_below(2)));
  }
  return testutil::make_dataset(rows, labels);
}

std::array<std::size_t, 2> class_sizes(const data::Dataset& ds) {
  std::array<std::size_t, 2> n{0, 0};
  for (int label : ds.labels) ++n[static_cast<std::size_t>(label)];
  return n;
}

}  // namespace

TEST_CASE("plan_flips picks the floor of fraction times class size, stratified") {
  const data::Dataset ds = testutil::make_dataset(
      {{0.0}, {1.0}, {2.0}, {3.0}, {4.0}, {5.0}, {6.0}, {7.0}, {8.0}, {9.0}},
      {0, 0, 0, 0, 0, 0, 1, 1, 1, 1});  // 6 malware, 4 benign

  const PoisonPlan plan = plan_flips(ds, 0.5, 42);
  CHECK(plan.fraction_per_class == 0.5);
  CHECK(plan.seed == 42);
  CHECK(plan.counts_per_class[0] == 3);  // floor(0.5 * 6)
  CHECK(plan.counts_per_class[1] == 2);  // floor(0.5 * 4)
  CHECK(plan.flips.size() == 5);

  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < plan.flips.size(); ++i) {
    const auto& flip = plan.flips[i];
    if (i > 0) CHECK(flip.row > plan.flips[i - 1].row);  // sorted, no duplicates
    seen.insert(flip.row);
    CHECK(ds.labels[flip.row] == flip.rule.source_class);
    CHECK(flip.rule.target_class == 1 - flip.rule.source_class);
  }
  CHECK(seen.size() == plan.flips.size());
}

TEST_CASE("planned counts match integer arithmetic across many datasets") {
  // Oracle: for fraction num/den, floor(fraction * n) must equal the integer
  // quotient (num * n) / den. Exercises the near-integer snap in floor_count.
  struct Ratio {
    double value;
    std::size_t num;
    std::size_t den;
  };
  const std::vector<Ratio> fractions = {{0.0, 0, 1},  {0.1, 1, 10}, {0.2, 1, 5},
                                        {0.25, 1, 4}, {0.5, 1, 2},  {1.0, 1, 1}};
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 4 + rng.next_below(300);
    const data::Dataset ds = random_labeled_dataset(n, rng);
    const auto sizes = class_sizes(ds);
    for (const auto& f : fractions) {
      const PoisonPlan plan = plan_flips(ds, f.value, 1000 + static_cast<std::uint64_t>(trial));
      for (int cls = 0; cls < 2; ++cls) {
        const std::size_t expected = f.num * sizes[static_cast<std::size_t>(cls)] / f.den;
        CHECK(plan.counts_per_class[static_cast<std::size_t>(cls)] == expected);
      }
      CHECK(plan.flips.size() == plan.counts_per_class[0] + plan.counts_per_class[1]);
    }
  }
}

TEST_CASE("apply_flips flips exactly the planned labels and nothing else") {
  Rng rng(31);
  const data::Dataset ds = random_labeled_dataset(50, rng);
  const PoisonPlan plan = plan_flips(ds, 0.2, 5);
  const data::Dataset poisoned = apply_flips(ds, plan, ThreatModel::executable_default());

  CHECK(poisoned.features == ds.features);  // bitwise: features never move
  std::set<std::size_t> flipped_rows;
  for (const auto& flip : plan.flips) flipped_rows.insert(flip.row);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (flipped_rows.count(r)) {
      CHECK(poisoned.labels[r] == 1 - ds.labels[r]);
    } else {
      CHECK(poisoned.labels[r] == ds.labels[r]);
    }
  }
}

TEST_CASE("inverse plan restores the clean labels bit-exactly") {
  Rng rng(17);
  for (double fraction : {0.1, 0.25, 0.5, 1.0}) {
    const data::Dataset ds = random_labeled_dataset(80, rng);
    const PoisonPlan plan = plan_flips(ds, fraction, 9);
    const auto threat = ThreatModel::executable_default();
    const data::Dataset poisoned = apply_flips(ds, plan, threat);
    const data::Dataset restored = apply_flips(poisoned, inverse(plan), threat);
    CHECK(data::same_data(restored, ds));
  }
}

TEST_CASE("plans are deterministic in the seed") {
  Rng rng(3);
  const data::Dataset ds = random_labeled_dataset(60, rng);
  CHECK(plan_flips(ds, 0.3, 11) == plan_flips(ds, 0.3, 11));
  CHECK_FALSE(plan_flips(ds, 0.3, 11) == plan_flips(ds, 0.3, 12));
}

TEST_CASE("apply_flips rejects stale plans") {
  Rng rng(13);
  const data::Dataset ds = random_labeled_dataset(40, rng);
  const PoisonPlan plan = plan_flips(ds, 0.25, 8);
  const auto threat = ThreatModel::executable_default();

  SUBCASE("labels changed since planning") {
    data::Dataset edited = ds;
    edited.labels[plan.flips.front().row] = 1 - edited.labels[plan.flips.front().row];
    CHECK_THROWS_AS(apply_flips(edited, plan, threat), StalePlanError);
  }
  SUBCASE("row index out of range") {
    PoisonPlan bad = plan;
    bad.flips.back().row = ds.size();
    CHECK_THROWS_AS(apply_flips(ds, bad, threat), StalePlanError);
  }
  SUBCASE("double application detects the first mismatch") {
    const data::Dataset once = apply_flips(ds, plan, threat);
    CHECK_THROWS_AS(apply_flips(once, plan, threat), StalePlanError);
  }
}

TEST_CASE("only one threat combination is executable") {
  Rng rng(29);
  const data::Dataset ds = random_labeled_dataset(20, rng);
  const PoisonPlan plan = plan_flips(ds, 0.1, 4);

  std::size_t executable = 0;
  for (auto knowledge : {AttackerKnowledge::kBlackBox, AttackerKnowledge::kGrayBox,
                         AttackerKnowledge::kWhiteBox}) {
    for (auto capability : {AttackerCapability::kDataInjection,
                            AttackerCapability::kDataModification,
                            AttackerCapability::kLogicCorruption}) {
      for (auto goal : {AdversarialGoal::kUntargetedMisclassification,
                        AdversarialGoal::kTargetedMisclassification,
                        AdversarialGoal::kConfidenceReduction}) {
        const ThreatModel threat{AttackSurface::kTrainingData, knowledge, capability, goal};
        if (threat.is_executable()) {
          ++executable;
          CHECK_NOTHROW(apply_flips(ds, plan, threat));
        } else {
          CHECK_THROWS_AS(apply_flips(ds, plan, threat), UnsupportedThreatError);
        }
      }
    }
  }
  CHECK(executable == 1);
  CHECK(ThreatModel::executable_default().is_executable());
}

TEST_CASE("poison plan round-trips through json") {
  Rng rng(41);
  const data::Dataset ds = random_labeled_dataset(30, rng);
  const PoisonPlan plan = plan_flips(ds, 0.5, 77);
  CHECK(PoisonPlan::from_json(plan.to_json()) == plan);

  const PoisonPlan empty = plan_flips(ds, 0.0, 77);
  CHECK(empty.flips.empty());
  CHECK(PoisonPlan::from_json(empty.to_json()) == empty);
}

TEST_CASE("threat model round-trips through json") {
  const ThreatModel t{AttackSurface::kTrainingData, AttackerKnowledge::kWhiteBox,
                      AttackerCapability::kLogicCorruption,
                      AdversarialGoal::kConfidenceReduction};
  CHECK(ThreatModel::from_json(t.to_json()) == t);
  CHECK(ThreatModel::from_json(ThreatModel::executable_default().to_json()) ==
        ThreatModel::executable_default());
}

TEST_CASE("threat enum tokens round-trip and reject unknown text") {
  CHECK(surface_from_string(to_string(AttackSurface::kTrainingData)) ==
        AttackSurface::kTrainingData);
  for (auto v : {AttackerKnowledge::kBlackBox, AttackerKnowledge::kGrayBox,
                 AttackerKnowledge::kWhiteBox}) {
    CHECK(knowledge_from_string(to_string(v)) == v);
  }
  for (auto v : {AttackerCapability::kDataInjection, AttackerCapability::kDataModification,
                 AttackerCapability::kLogicCorruption}) {
    CHECK(capability_from_string(to_string(v)) == v);
  }
  for (auto v : {AdversarialGoal::kUntargetedMisclassification,
                 AdversarialGoal::kTargetedMisclassification,
                 AdversarialGoal::kConfidenceReduction}) {
    CHECK(goal_from_string(to_string(v)) == v);
  }
  CHECK_THROWS_AS(surface_from_string("network"), ConfigError);
  CHECK_THROWS_AS(knowledge_from_string("psychic"), ConfigError);
  CHECK_THROWS_AS(capability_from_string("nope"), ConfigError);
  CHECK_THROWS_AS(goal_from_string(""), ConfigError);
}

TEST_CASE("full-fraction plan flips every row") {
  const data::Dataset ds = testutil::make_dataset({{0.0}, {1.0}, {2.0}, {3.0}}, {0, 0, 1, 1});
  const PoisonPlan plan = plan_flips(ds, 1.0, 2);
  CHECK(plan.flips.size() == 4);
  const data::Dataset poisoned = apply_flips(ds, plan, ThreatModel::executable_default());
  CHECK(poisoned.labels == std::vector<int>{1, 1, 0, 0});
}
