#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "poisonbench/dataset.hpp"

namespace poisonbench::poison {

// Threat taxonomy. The vocabulary is wider than what this toolkit can run:
// only training-data label modification under black-box knowledge with an
// untargeted goal is executable, and apply_flips enforces that.
enum class AttackSurface { kTrainingData };
enum class AttackerKnowledge { kBlackBox, kGrayBox, kWhiteBox };
enum class AttackerCapability { kDataInjection, kDataModification, kLogicCorruption };
enum class AdversarialGoal {
  kUntargetedMisclassification,
  kTargetedMisclassification,
  kConfidenceReduction
};

struct ThreatModel {
  AttackSurface surface = AttackSurface::kTrainingData;
  AttackerKnowledge knowledge = AttackerKnowledge::kBlackBox;
  AttackerCapability capability = AttackerCapability::kDataModification;
  AdversarialGoal goal = AdversarialGoal::kUntargetedMisclassification;

  static ThreatModel executable_default() { return ThreatModel{}; }
  bool is_executable() const;

  friend bool operator==(const ThreatModel&, const ThreatModel&) = default;
  nlohmann::json to_json() const;
  static ThreatModel from_json(const nlohmann::json& j);
};

struct FlipRule {
  int source_class = 0;
  int target_class = 1;

  friend bool operator==(const FlipRule&, const FlipRule&) = default;
};

struct PlannedFlip {
  std::size_t row = 0;
  FlipRule rule;

  friend bool operator==(const PlannedFlip&, const PlannedFlip&) = default;
};

// Explicit, replayable record of which training rows get their labels
// flipped. Flips are sorted by row index and each row appears at most once.
struct PoisonPlan {
  double fraction_per_class = 0.0;
  std::uint64_t seed = 0;
  std::vector<PlannedFlip> flips;
  std::array<std::size_t, 2> counts_per_class{0, 0};  // indexed by source label

  friend bool operator==(const PoisonPlan&, const PoisonPlan&) = default;
  nlohmann::json to_json() const;
  static PoisonPlan from_json(const nlohmann::json& j);
};

// Selects floor(fraction * n_c) rows of each class c by a seeded per-class
// shuffle (class streams are derived from the seed, so they are independent)
// and assigns each the rule c -> 1-c.
PoisonPlan plan_flips(const data::Dataset& train, double fraction_per_class,
                      std::uint64_t seed);

// Applies a plan to the dataset it was built for. Features are copied
// untouched; only labels change. Throws UnsupportedThreatError if the threat
// is not the executable combination, StalePlanError if any flip's row or
// source class no longer matches the data.
data::Dataset apply_flips(const data::Dataset& train, const PoisonPlan& plan,
                          const ThreatModel& threat);

// Same indices with source/target swapped; applying it to the poisoned set
// restores the clean labels exactly.
PoisonPlan inverse(const PoisonPlan& plan);

// Enum <-> config token helpers ("black_box", "data_modification", ...).
std::string to_string(AttackSurface v);
std::string to_string(AttackerKnowledge v);
std::string to_string(AttackerCapability v);
std::string to_string(AdversarialGoal v);
AttackSurface surface_from_string(const std::string& s);
AttackerKnowledge knowledge_from_string(const std::string& s);
AttackerCapability capability_from_string(const std::string& s);
AdversarialGoal goal_from_string(const std::string& s);

}  // namespace poisonbench::poison
