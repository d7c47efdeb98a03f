#include "coevo/records.hpp"

#include <algorithm>
#include <cstddef>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "coevo/errors.hpp"

namespace coevo {

namespace {

using nlohmann::json;

constexpr const char* kPoolSchema = "coevo.pool.v1";
constexpr const char* kLabelSchema = "coevo.labels.v1";
constexpr const char* kTruthSchema = "coevo.truth.v1";
constexpr const char* kRewardSchema = "coevo.rewards.v1";

// Calls `record` with each parsed non-empty line after verifying the schema
// header. Empty input yields no calls.
template <typename Fn>
void for_each_record(const std::string& text, const char* schema, Fn&& record) {
  std::istringstream in(text);
  std::string line;
  long line_number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid record: ") + e.what(), line_number);
    }
    if (!value.is_object()) {
      throw ParseError("record is not an object", line_number);
    }

    if (!header_seen) {
      if (!value.contains("schema") || !value["schema"].is_string()) {
        throw ParseError(std::string("first record must be a {\"schema\":\"") + schema +
                             "\"} header",
                         line_number);
      }
      const auto found = value["schema"].get<std::string>();
      if (found != schema) {
        throw ParseError("unsupported schema '" + found + "', expected '" + schema + "'",
                         line_number);
      }
      header_seen = true;
      continue;
    }
    record(value, line_number);
  }
}

std::string required_string(const json& value, const char* field, long line) {
  if (!value.contains(field) || !value[field].is_string()) {
    throw ParseError(std::string("missing or non-string field '") + field + "'", line);
  }
  return value[field].get<std::string>();
}

int required_int(const json& value, const char* field, long line) {
  if (!value.contains(field) || !value[field].is_number_integer()) {
    throw ParseError(std::string("missing or non-integer field '") + field + "'", line);
  }
  return value[field].get<int>();
}

double required_number(const json& value, const char* field, long line) {
  if (!value.contains(field) || !value[field].is_number()) {
    throw ParseError(std::string("missing or non-numeric field '") + field + "'", line);
  }
  return value[field].get<double>();
}

void reject_unknown_fields(const json& value, const std::set<std::string>& known, long line) {
  for (const auto& [key, _] : value.items()) {
    if (known.find(key) == known.end()) {
      throw ParseError("unknown field '" + key + "'", line);
    }
  }
}

bool canonical_answer(const std::string& answer) {
  if (answer.empty()) return false;
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  return not_space(answer.front()) && not_space(answer.back());
}

std::string header_line(const char* schema) {
  json header;
  header["schema"] = schema;
  return header.dump();
}

}  // namespace

std::vector<VotePool> pools_from_jsonl(const std::string& text) {
  std::map<std::string, VotePool> by_question;
  std::set<std::tuple<std::string, std::string, int>> seen;

  for_each_record(text, kPoolSchema, [&](const json& value, long line) {
    reject_unknown_fields(value, {"question", "model", "index", "answer"}, line);
    AnswerSample sample;
    sample.question_id = required_string(value, "question", line);
    sample.model_id = required_string(value, "model", line);
    sample.sample_index = required_int(value, "index", line);
    if (sample.sample_index < 0) {
      throw ParseError("negative sample index", line);
    }
    if (!value.contains("answer")) {
      throw ParseError("missing field 'answer' (use null for Invalid)", line);
    }
    if (value["answer"].is_string()) {
      sample.answer = value["answer"].get<std::string>();
      if (!canonical_answer(*sample.answer)) {
        throw ParseError("answer is empty or has surrounding whitespace", line);
      }
    } else if (!value["answer"].is_null()) {
      throw ParseError("field 'answer' must be a string or null", line);
    }

    if (!seen.insert({sample.question_id, sample.model_id, sample.sample_index}).second) {
      throw ParseError("duplicate sample (" + sample.question_id + ", " + sample.model_id +
                           ", " + std::to_string(sample.sample_index) + ")",
                       line);
    }

    VotePool& pool = by_question[sample.question_id];
    pool.question_id = sample.question_id;
    pool.k_requested = std::max(pool.k_requested, sample.sample_index + 1);
    pool.add(sample);
  });

  std::vector<VotePool> pools;
  pools.reserve(by_question.size());
  for (auto& [_, pool] : by_question) pools.push_back(std::move(pool));
  return pools;
}

std::string pools_to_jsonl(const std::vector<VotePool>& pools) {
  std::string out = header_line(kPoolSchema) + "\n";
  for (const VotePool& pool : pools) {
    for (const auto& [model_id, samples] : pool.per_model_samples) {
      std::vector<const AnswerSample*> by_index(static_cast<std::size_t>(pool.k_requested),
                                                nullptr);
      for (const AnswerSample& sample : samples) {
        by_index[static_cast<std::size_t>(sample.sample_index)] = &sample;
      }
      for (int i = 0; i < pool.k_requested; ++i) {
        json record;
        record["question"] = pool.question_id;
        record["model"] = model_id;
        record["index"] = i;
        if (by_index[static_cast<std::size_t>(i)] != nullptr) {
          record["answer"] = *by_index[static_cast<std::size_t>(i)]->answer;
        } else {
          record["answer"] = nullptr;
        }
        out += record.dump() + "\n";
      }
    }
  }
  return out;
}

std::vector<LabelEntry> labels_from_jsonl(const std::string& text) {
  std::vector<LabelEntry> entries;
  std::set<std::string> questions;

  for_each_record(text, kLabelSchema, [&](const json& value, long line) {
    LabelEntry entry;
    entry.question_id = required_string(value, "question", line);
    if (!questions.insert(entry.question_id).second) {
      throw ParseError("duplicate label for question '" + entry.question_id + "'", line);
    }
    if (value.contains("skipped")) {
      reject_unknown_fields(value, {"question", "skipped"}, line);
      entry.skipped = true;
      entries.push_back(std::move(entry));
      return;
    }
    reject_unknown_fields(
        value, {"question", "label", "margin", "weighted_mass", "sc", "contributing"}, line);
    entry.answer = required_string(value, "label", line);
    entry.margin = required_number(value, "margin", line);
    entry.weighted_mass = required_number(value, "weighted_mass", line);
    if (value.contains("sc")) {
      if (!value["sc"].is_object()) {
        throw ParseError("field 'sc' must be an object", line);
      }
      for (const auto& [model, sc] : value["sc"].items()) {
        if (!sc.is_number()) {
          throw ParseError("sc entry for '" + model + "' is not a number", line);
        }
        entry.sc[model] = sc.get<double>();
      }
    }
    if (value.contains("contributing")) {
      if (!value["contributing"].is_array()) {
        throw ParseError("field 'contributing' must be an array", line);
      }
      for (const auto& model : value["contributing"]) {
        if (!model.is_string()) {
          throw ParseError("contributing entries must be strings", line);
        }
        entry.contributing.push_back(model.get<std::string>());
      }
    }
    entries.push_back(std::move(entry));
  });
  return entries;
}

std::string labels_to_jsonl(const std::vector<LabelEntry>& entries) {
  std::string out = header_line(kLabelSchema) + "\n";
  for (const LabelEntry& entry : entries) {
    json record;
    record["question"] = entry.question_id;
    if (entry.skipped) {
      record["skipped"] = "empty_pool";
    } else {
      record["label"] = entry.answer;
      record["margin"] = entry.margin;
      record["weighted_mass"] = entry.weighted_mass;
      record["sc"] = json::object();
      for (const auto& [model, sc] : entry.sc) record["sc"][model] = sc;
      record["contributing"] = entry.contributing;
    }
    out += record.dump() + "\n";
  }
  return out;
}

LabelEntry make_label_entry(const PseudoLabel& label,
                            const std::map<std::string, SelfConsistencyScore>& scores) {
  LabelEntry entry;
  entry.question_id = label.question_id;
  entry.answer = label.answer;
  entry.margin = label.margin;
  entry.weighted_mass = label.weighted_mass;
  entry.contributing.assign(label.contributing_models.begin(), label.contributing_models.end());
  for (const auto& [model, score] : scores) entry.sc[model] = score.sc;
  return entry;
}

LabelEntry make_skipped_entry(const std::string& question_id) {
  LabelEntry entry;
  entry.question_id = question_id;
  entry.skipped = true;
  return entry;
}

std::map<std::string, std::string> truth_from_jsonl(const std::string& text) {
  std::map<std::string, std::string> truth;
  for_each_record(text, kTruthSchema, [&](const json& value, long line) {
    reject_unknown_fields(value, {"question", "answer"}, line);
    const std::string question = required_string(value, "question", line);
    const std::string answer = required_string(value, "answer", line);
    if (!truth.emplace(question, answer).second) {
      throw ParseError("duplicate truth entry for question '" + question + "'", line);
    }
  });
  return truth;
}

std::string truth_to_jsonl(const std::map<std::string, std::string>& truth) {
  std::string out = header_line(kTruthSchema) + "\n";
  for (const auto& [question, answer] : truth) {
    json record;
    record["question"] = question;
    record["answer"] = answer;
    out += record.dump() + "\n";
  }
  return out;
}

std::string rewards_to_jsonl(const std::vector<RewardGroup>& groups) {
  std::string out = header_line(kRewardSchema) + "\n";
  for (const RewardGroup& group : groups) {
    json record;
    record["question"] = group.question_id;
    record["model"] = group.model_id;
    record["rewards"] = group.rewards;
    out += record.dump() + "\n";
  }
  return out;
}

}  // namespace coevo
