#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>

#include "coevo/answers.hpp"

namespace coevo {

// Self-consistency of one model's sample set: the frequency of its most
// common valid answer. Invalid samples are excluded from the denominator;
// a model with no valid samples scores 0.
struct SelfConsistencyScore {
  std::string model_id;
  double sc = 0.0;
  std::optional<std::string> mode_answer;  // nullopt when no valid samples
  int valid_count = 0;
};

// The vote winner plus diagnostics. weighted_mass is the winning tally,
// margin the gap to the runner-up (equal to the mass when unopposed).
struct PseudoLabel {
  std::string question_id;
  std::string answer;
  double weighted_mass = 0.0;
  double margin = 0.0;
  std::set<std::string> contributing_models;

  bool operator==(const PseudoLabel&) const = default;
};

// Samples must all belong to one (question, model). Mode ties break to the
// lexicographically smallest answer.
SelfConsistencyScore self_consistency(std::span<const AnswerSample> samples);

// Per-model scores for a whole pool.
std::map<std::string, SelfConsistencyScore> self_consistency(const VotePool& pool);

// argmax_a sum_n sum_k SC_n * [a == o_{n,k}], ties to the lexicographically
// smallest answer. Throws EmptyPoolError when the pool has no valid sample.
// `scores` must cover every model in the pool.
PseudoLabel sc_weighted_vote(const VotePool& pool,
                             const std::map<std::string, SelfConsistencyScore>& scores);

// Unweighted majority vote with the same tie-break rule.
PseudoLabel simple_vote(const VotePool& pool);

}  // namespace coevo
