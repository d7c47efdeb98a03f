#pragma once

#include <map>
#include <string>
#include <vector>

#include "coevo/answers.hpp"
#include "coevo/rewards.hpp"
#include "coevo/voting.hpp"

// Line-oriented record files: one JSON object per line, first line a schema
// header such as {"schema":"coevo.pool.v1"}. Readers throw ParseError with
// the offending line number; an entirely empty file parses to zero records.

namespace coevo {

// One voting result per question, or a skip marker for questions whose pool
// had no valid sample.
struct LabelEntry {
  std::string question_id;
  bool skipped = false;
  std::string answer;
  double margin = 0.0;
  double weighted_mass = 0.0;
  std::map<std::string, double> sc;
  std::vector<std::string> contributing;
};

// coevo.pool.v1: {"question","model","index","answer"} with null answer for
// Invalid samples. Pools come back keyed lexicographically by question with
// k_requested = 1 + max index seen for that question. Duplicate
// (question, model, index) triples are rejected, as are answers that are
// empty or carry surrounding whitespace (they could never match a vote).
std::vector<VotePool> pools_from_jsonl(const std::string& text);
std::string pools_to_jsonl(const std::vector<VotePool>& pools);

// coevo.labels.v1: one entry per question.
std::vector<LabelEntry> labels_from_jsonl(const std::string& text);
std::string labels_to_jsonl(const std::vector<LabelEntry>& entries);

LabelEntry make_label_entry(const PseudoLabel& label,
                            const std::map<std::string, SelfConsistencyScore>& scores);
LabelEntry make_skipped_entry(const std::string& question_id);

// coevo.truth.v1: {"question","answer"}.
std::map<std::string, std::string> truth_from_jsonl(const std::string& text);
std::string truth_to_jsonl(const std::map<std::string, std::string>& truth);

// coevo.rewards.v1: {"question","model","rewards":[0|1,...]}.
std::string rewards_to_jsonl(const std::vector<RewardGroup>& groups);

}  // namespace coevo
