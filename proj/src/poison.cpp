#include "poisonbench/poison.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/core.h>

#include "poisonbench/errors.hpp"
#include "poisonbench/rng.hpp"

namespace poisonbench::poison {

bool ThreatModel::is_executable() const {
  return surface == AttackSurface::kTrainingData &&
         knowledge == AttackerKnowledge::kBlackBox &&
         capability == AttackerCapability::kDataModification &&
         goal == AdversarialGoal::kUntargetedMisclassification;
}

nlohmann::json ThreatModel::to_json() const {
  return {{"surface", to_string(surface)},
          {"knowledge", to_string(knowledge)},
          {"capability", to_string(capability)},
          {"goal", to_string(goal)}};
}

ThreatModel ThreatModel::from_json(const nlohmann::json& j) {
  ThreatModel t;
  t.surface = surface_from_string(j.at("surface").get<std::string>());
  t.knowledge = knowledge_from_string(j.at("knowledge").get<std::string>());
  t.capability = capability_from_string(j.at("capability").get<std::string>());
  t.goal = goal_from_string(j.at("goal").get<std::string>());
  return t;
}

nlohmann::json PoisonPlan::to_json() const {
  // Flips grouped by source class as sorted row lists; compact and auditable.
  nlohmann::json by_class = {{"0", nlohmann::json::array()}, {"1", nlohmann::json::array()}};
  for (const auto& flip : flips) {
    by_class[flip.rule.source_class == 0 ? "0" : "1"].push_back(flip.row);
  }
  return {{"fraction", fraction_per_class},
          {"seed", seed},
          {"counts", {{"0", counts_per_class[0]}, {"1", counts_per_class[1]}}},
          {"flips", by_class}};
}

PoisonPlan PoisonPlan::from_json(const nlohmann::json& j) {
  PoisonPlan plan;
  plan.fraction_per_class = j.at("fraction").get<double>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.counts_per_class[0] = j.at("counts").at("0").get<std::size_t>();
  plan.counts_per_class[1] = j.at("counts").at("1").get<std::size_t>();
  for (int cls : {0, 1}) {
    for (const auto& row : j.at("flips").at(cls == 0 ? "0" : "1")) {
      plan.flips.push_back({row.get<std::size_t>(), {cls, 1 - cls}});
    }
  }
  std::sort(plan.flips.begin(), plan.flips.end(),
            [](const PlannedFlip& a, const PlannedFlip& b) { return a.row < b.row; });
  return plan;
}

PoisonPlan plan_flips(const data::Dataset& train, double fraction_per_class,
                      std::uint64_t seed) {
  if (!(fraction_per_class >= 0.0 && fraction_per_class <= 1.0)) {
    throw std::invalid_argument(
        fmt::format("flip fraction {} outside [0, 1]", fraction_per_class));
  }
  PoisonPlan plan;
  plan.fraction_per_class = fraction_per_class;
  plan.seed = seed;

  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < train.labels.size(); ++r) {
      if (train.labels[r] == cls) members.push_back(r);
    }
    // Per-class stream derived from the plan seed: the draw for one class
    // never disturbs the other, so class order cannot leak into the plan.
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    const std::size_t count = floor_count(fraction_per_class, members.size());
    plan.counts_per_class[static_cast<std::size_t>(cls)] = count;
    for (std::size_t i = 0; i < count; ++i) {
      plan.flips.push_back({members[i], {cls, 1 - cls}});
    }
  }
  std::sort(plan.flips.begin(), plan.flips.end(),
            [](const PlannedFlip& a, const PlannedFlip& b) { return a.row < b.row; });
  return plan;
}

data::Dataset apply_flips(const data::Dataset& train, const PoisonPlan& plan,
                          const ThreatModel& threat) {
  if (!threat.is_executable()) {
    throw UnsupportedThreatError(fmt::format(
        "threat ({}, {}, {}, {}) is not runnable; only label modification on "
        "training data under black-box knowledge with an untargeted goal is",
        to_string(threat.surface), to_string(threat.knowledge),
        to_string(threat.capability), to_string(threat.goal)));
  }

  data::Dataset poisoned = train;  // features copied untouched
  for (const auto& flip : plan.flips) {
    if (flip.row >= poisoned.labels.size()) {
      throw StalePlanError(fmt::format("flip row {} outside dataset of {} rows",
                                       flip.row, poisoned.labels.size()));
    }
    if (poisoned.labels[flip.row] != flip.rule.source_class) {
      throw StalePlanError(fmt::format(
          "row {} has label {}, plan expected {}; the plan was built for other data",
          flip.row, poisoned.labels[flip.row], flip.rule.source_class));
    }
    poisoned.labels[flip.row] = flip.rule.target_class;
  }
  poisoned.meta.note(fmt::format("poison: flipped {}+{} labels, fraction {}, seed {}",
                                 plan.counts_per_class[0], plan.counts_per_class[1],
                                 plan.fraction_per_class, plan.seed));
  return poisoned;
}

PoisonPlan inverse(const PoisonPlan& plan) {
  PoisonPlan inv = plan;
  for (auto& flip : inv.flips) {
    std::swap(flip.rule.source_class, flip.rule.target_class);
  }
  inv.counts_per_class = {plan.counts_per_class[1], plan.counts_per_class[0]};
  return inv;
}

std::string to_string(AttackSurface) { return "training_data"; }

std::string to_string(AttackerKnowledge v) {
  switch (v) {
    case AttackerKnowledge::kBlackBox: return "black_box";
    case AttackerKnowledge::kGrayBox: return "gray_box";
    case AttackerKnowledge::kWhiteBox: return "white_box";
  }
  return "black_box";
}

std::string to_string(AttackerCapability v) {
  switch (v) {
    case AttackerCapability::kDataInjection: return "data_injection";
    case AttackerCapability::kDataModification: return "data_modification";
    case AttackerCapability::kLogicCorruption: return "logic_corruption";
  }
  return "data_modification";
}

std::string to_string(AdversarialGoal v) {
  switch (v) {
    case AdversarialGoal::kUntargetedMisclassification: return "untargeted";
    case AdversarialGoal::kTargetedMisclassification: return "targeted";
    case AdversarialGoal::kConfidenceReduction: return "confidence_reduction";
  }
  return "untargeted";
}

namespace {

[[noreturn]] void bad_token(const char* what, const std::string& s) {
  throw ConfigError(fmt::format("unknown {} '{}'", what, s));
}

}  // namespace

AttackSurface surface_from_string(const std::string& s) {
  if (s == "training_data") return AttackSurface::kTrainingData;
  bad_token("attack surface", s);
}

AttackerKnowledge knowledge_from_string(const std::string& s) {
  if (s == "black_box") return AttackerKnowledge::kBlackBox;
  if (s == "gray_box") return AttackerKnowledge::kGrayBox;
  if (s == "white_box") return AttackerKnowledge::kWhiteBox;
  bad_token("attacker knowledge", s);
}

AttackerCapability capability_from_string(const std::string& s) {
  if (s == "data_injection") return AttackerCapability::kDataInjection;
  if (s == "data_modification") return AttackerCapability::kDataModification;
  if (s == "logic_corruption") return AttackerCapability::kLogicCorruption;
  bad_token("attacker capability", s);
}

AdversarialGoal goal_from_string(const std::string& s) {
  if (s == "untargeted") return AdversarialGoal::kUntargetedMisclassification;
  if (s == "targeted") return AdversarialGoal::kTargetedMisclassification;
  if (s == "confidence_reduction") return AdversarialGoal::kConfidenceReduction;
  bad_token("adversarial goal", s);
}

}  // namespace poisonbench::poison
