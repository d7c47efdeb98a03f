#include "coevo/voting.hpp"

#include <cassert>

#include "coevo/errors.hpp"

namespace coevo {

namespace {

// Scans an answer->tally map and returns the argmax; ties resolve to the
// lexicographically smallest key, which map iteration order gives for free.
std::pair<std::string, double> argmax_tally(const std::map<std::string, double>& tally) {
  std::string best;
  double best_mass = -1.0;
  for (const auto& [answer, mass] : tally) {
    if (mass > best_mass) {
      best = answer;
      best_mass = mass;
    }
  }
  return {best, best_mass};
}

double runner_up_mass(const std::map<std::string, double>& tally, const std::string& winner) {
  double second = 0.0;
  for (const auto& [answer, mass] : tally) {
    if (answer != winner && mass > second) second = mass;
  }
  return second;
}

PseudoLabel label_from_tally(const VotePool& pool, const std::map<std::string, double>& tally) {
  if (tally.empty()) throw EmptyPoolError(pool.question_id);
  PseudoLabel label;
  label.question_id = pool.question_id;
  auto [winner, mass] = argmax_tally(tally);
  label.answer = winner;
  label.weighted_mass = mass;
  label.margin = mass - runner_up_mass(tally, winner);
  for (const auto& [model_id, samples] : pool.per_model_samples) {
    for (const auto& s : samples) {
      if (*s.answer == winner) {
        label.contributing_models.insert(model_id);
        break;
      }
    }
  }
  return label;
}

}  // namespace

SelfConsistencyScore self_consistency(std::span<const AnswerSample> samples) {
  SelfConsistencyScore score;
  if (!samples.empty()) score.model_id = samples.front().model_id;

  std::map<std::string, int> counts;
  for (const auto& s : samples) {
    assert(samples.front().model_id == s.model_id);
    assert(samples.front().question_id == s.question_id);
    if (s.valid()) ++counts[*s.answer];
  }

  for (const auto& [answer, n] : counts) score.valid_count += n;
  if (score.valid_count == 0) return score;  // sc = 0, mode = Invalid

  int best = 0;
  for (const auto& [answer, n] : counts) {
    if (n > best) {  // strict: first (lex-smallest) answer wins ties
      best = n;
      score.mode_answer = answer;
    }
  }
  score.sc = static_cast<double>(best) / static_cast<double>(score.valid_count);
  return score;
}

std::map<std::string, SelfConsistencyScore> self_consistency(const VotePool& pool) {
  std::map<std::string, SelfConsistencyScore> scores;
  for (const auto& [model_id, samples] : pool.per_model_samples) {
    auto score = self_consistency(std::span<const AnswerSample>(samples));
    score.model_id = model_id;  // keep the id even for empty sample sets
    scores.emplace(model_id, std::move(score));
  }
  return scores;
}

PseudoLabel sc_weighted_vote(const VotePool& pool,
                             const std::map<std::string, SelfConsistencyScore>& scores) {
  std::map<std::string, double> tally;
  for (const auto& [model_id, samples] : pool.per_model_samples) {
    const auto it = scores.find(model_id);
    assert(it != scores.end());
    const double weight = it == scores.end() ? 0.0 : it->second.sc;
    for (const auto& s : samples) tally[*s.answer] += weight;
  }
  return label_from_tally(pool, tally);
}

PseudoLabel simple_vote(const VotePool& pool) {
  std::map<std::string, double> tally;
  for (const auto& [_, samples] : pool.per_model_samples) {
    for (const auto& s : samples) tally[*s.answer] += 1.0;
  }
  return label_from_tally(pool, tally);
}

}  // namespace coevo
