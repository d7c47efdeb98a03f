#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "coevo/answers.hpp"
#include "coevo/voting.hpp"

namespace coevo {

// Consensus reward bits for one model's sample group: one entry per
// requested sample, invalid samples scored 0.
struct RewardGroup {
  std::string question_id;
  std::string model_id;
  std::vector<int> rewards;  // length k_requested, entries in {0,1}
};

struct StepMetrics {
  double label_accuracy = 0.0;
  double reward_accuracy = 0.0;
  std::map<std::string, double> per_model_sc;
  double collective_consistency = 0.0;

  bool operator==(const StepMetrics&) const = default;
};

// Reward 1 exactly for valid samples equal to label.answer; 0 otherwise,
// including the slots of invalid or missing samples. One group per model
// in the pool, each of length pool.k_requested.
std::vector<RewardGroup> binary_rewards(const VotePool& pool, const PseudoLabel& label);

// Fraction of pseudo-labels equal to ground truth. Throws
// InsufficientDataError on an empty label sequence and
// MissingGroundTruthError when a labeled question has no truth entry.
double label_accuracy(std::span<const PseudoLabel> labels,
                      const std::map<std::string, std::string>& ground_truth);

// Fraction of per-sample reward bits agreeing with the bits a ground-truth
// verifier would assign. Slots without a valid sample agree trivially
// (both sides 0).
double reward_accuracy(std::span<const RewardGroup> groups, std::span<const VotePool> pools,
                       const std::map<std::string, std::string>& ground_truth);

// Share of all valid samples (across models) equal to the pool's simple-vote
// mode. Throws EmptyPoolError when the pool has no valid sample.
double collective_consistency(const VotePool& pool);

}  // namespace coevo
