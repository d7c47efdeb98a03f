#include "coevo/rewards.hpp"

#include "coevo/errors.hpp"

namespace coevo {

std::vector<RewardGroup> binary_rewards(const VotePool& pool, const PseudoLabel& label) {
  std::vector<RewardGroup> groups;
  groups.reserve(pool.per_model_samples.size());
  for (const auto& [model_id, samples] : pool.per_model_samples) {
    RewardGroup group{pool.question_id, model_id, std::vector<int>(pool.k_requested, 0)};
    for (const auto& s : samples) {
      if (s.sample_index < pool.k_requested && *s.answer == label.answer) {
        group.rewards[s.sample_index] = 1;
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

double label_accuracy(std::span<const PseudoLabel> labels,
                      const std::map<std::string, std::string>& ground_truth) {
  if (labels.empty()) throw InsufficientDataError("label_accuracy: no labels");
  int correct = 0;
  for (const auto& label : labels) {
    const auto it = ground_truth.find(label.question_id);
    if (it == ground_truth.end()) throw MissingGroundTruthError(label.question_id);
    if (label.answer == it->second) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double reward_accuracy(std::span<const RewardGroup> groups, std::span<const VotePool> pools,
                       const std::map<std::string, std::string>& ground_truth) {
  std::map<std::string, const VotePool*> pool_by_question;
  for (const auto& pool : pools) pool_by_question[pool.question_id] = &pool;

  long total = 0;
  long agree = 0;
  for (const auto& group : groups) {
    const auto truth_it = ground_truth.find(group.question_id);
    if (truth_it == ground_truth.end()) throw MissingGroundTruthError(group.question_id);
    const std::string& truth = truth_it->second;

    // Oracle bit per requested slot: 1 iff a valid sample sits there and
    // equals the ground truth.
    std::vector<int> oracle(group.rewards.size(), 0);
    const auto pool_it = pool_by_question.find(group.question_id);
    if (pool_it != pool_by_question.end()) {
      const auto model_it = pool_it->second->per_model_samples.find(group.model_id);
      if (model_it != pool_it->second->per_model_samples.end()) {
        for (const auto& s : model_it->second) {
          if (s.sample_index < static_cast<int>(oracle.size()) && *s.answer == truth) {
            oracle[s.sample_index] = 1;
          }
        }
      }
    }
    for (std::size_t i = 0; i < group.rewards.size(); ++i) {
      ++total;
      if (group.rewards[i] == oracle[i]) ++agree;
    }
  }
  if (total == 0) throw InsufficientDataError("reward_accuracy: no reward bits");
  return static_cast<double>(agree) / static_cast<double>(total);
}

double collective_consistency(const VotePool& pool) {
  const PseudoLabel mode = simple_vote(pool);  // throws EmptyPoolError if empty
  int total = 0;
  int on_mode = 0;
  for (const auto& [_, samples] : pool.per_model_samples) {
    for (const auto& s : samples) {
      ++total;
      if (*s.answer == mode.answer) ++on_mode;
    }
  }
  return static_cast<double>(on_mode) / static_cast<double>(total);
}

}  // namespace coevo
