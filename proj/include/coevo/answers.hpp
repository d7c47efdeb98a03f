#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coevo {

// One candidate answer from one model for one question. An empty optional is
// the Invalid marker (unparseable output). Valid answers are canonical: no
// surrounding whitespace, byte-exact comparison defines equality.
struct AnswerSample {
  std::string question_id;
  std::string model_id;
  int sample_index = 0;
  std::optional<std::string> answer;

  bool valid() const { return answer.has_value(); }
  bool operator==(const AnswerSample&) const = default;
};

// All valid samples for one question, grouped by model. Models that produced
// no valid sample keep an (empty) entry so they still receive rewards.
struct VotePool {
  std::string question_id;
  int k_requested = 0;
  std::map<std::string, std::vector<AnswerSample>> per_model_samples;

  // Registers the sample's model; stores the sample only if it is valid.
  void add(const AnswerSample& s) {
    auto& samples = per_model_samples[s.model_id];
    if (s.valid()) samples.push_back(s);
  }

  int valid_count() const {
    int n = 0;
    for (const auto& [_, samples] : per_model_samples) n += static_cast<int>(samples.size());
    return n;
  }

  bool operator==(const VotePool&) const = default;
};

}  // namespace coevo
