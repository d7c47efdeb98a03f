#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace coevo {

// Error taxonomy. Input/config problems derive from InputError so the CLI
// can map them to exit code 2; everything else is an internal error (exit 1).

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pool (or pooled batch) with zero valid samples; the question must be
// skipped for the step.
struct EmptyPoolError : InputError {
  explicit EmptyPoolError(const std::string& question_id)
      : InputError("empty pool: no valid samples for question '" + question_id + "'") {}
};

struct MissingGroundTruthError : InputError {
  explicit MissingGroundTruthError(const std::string& question_id)
      : InputError("missing ground truth for question '" + question_id + "'") {}
};

struct InsufficientDataError : InputError {
  using InputError::InputError;
};

struct InsufficientPointsError : InputError {
  using InputError::InputError;
};

// The sampled answer has zero probability under the snapshot policy.
// Indicates a bookkeeping bug upstream, not bad user input.
struct ZeroOldProbabilityError : std::logic_error {
  using std::logic_error::logic_error;
};

struct SupportMismatchError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ShapeMismatchError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ParseError : InputError {
  ParseError(const std::string& what, long line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  long line_number;
};

struct ConfigError : InputError {
  explicit ConfigError(const std::string& what, std::vector<std::string> keys = {})
      : InputError(make_message(what, keys)), offending_keys(std::move(keys)) {}
  std::vector<std::string> offending_keys;

 private:
  static std::string make_message(const std::string& what, const std::vector<std::string>& keys) {
    if (keys.empty()) return what;
    std::string msg = what + " [keys:";
    for (const auto& k : keys) msg += " " + k;
    return msg + "]";
  }
};

}  // namespace coevo
