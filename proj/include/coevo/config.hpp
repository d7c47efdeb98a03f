#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coevo/grpo.hpp"
#include "coevo/policy.hpp"

namespace coevo {

enum class Mode {
  kRlccf,           // SC-weighted collective vote supervises every model
  kTtrlSingle,      // each model votes over its own pool only
  kRlccfSimpleVote  // collective vote without SC weighting
};

std::string mode_name(Mode mode);
// Throws ConfigError on an unrecognized name.
Mode parse_mode(const std::string& name);

// One (model, domain) competence entry; competence scales 1/sigma.
struct SkillEntry {
  int model_index = 0;
  std::string domain;
  double competence = 1.0;

  bool operator==(const SkillEntry&) const = default;
};

struct ExperimentConfig {
  Mode mode = Mode::kRlccf;
  std::uint64_t seed = 1;
  // When non-empty these drive multi-run simulate invocations; single-run
  // callers read `mode` and `seed`.
  std::vector<Mode> modes;
  std::vector<std::uint64_t> seeds;

  int steps = 300;
  int batch_size = 8;
  int n_models = 4;
  int samples_per_model = 16;
  // Samples drawn per model per question for reward estimation. 0 means the
  // collective pool size n_models * samples_per_model, so every mode spends
  // the same budget.
  int vote_budget = 0;
  int train_tasks = 200;
  int eval_tasks = 100;
  int vocab_size = 4;
  std::vector<std::string> domains{"math"};
  int eval_every = 10;
  int eval_samples = 32;
  double invalid_fraction = 0.0;

  double bias_std = 1.0;
  double noise_std = 1.5;
  std::vector<double> noise_std_per_model;
  std::vector<double> bias_std_per_model;
  std::vector<double> fixed_biases;
  std::vector<SkillEntry> skills;

  ClipConfig clip;

  int resolved_vote_budget() const {
    return vote_budget > 0 ? vote_budget : n_models * samples_per_model;
  }
  std::vector<Mode> resolved_modes() const {
    return modes.empty() ? std::vector<Mode>{mode} : modes;
  }
  std::vector<std::uint64_t> resolved_seeds() const {
    return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
  }
  BiasModelSpec bias_spec() const;

  // Throws ConfigError naming every offending key at once.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Parses the key=value config format (see docs in the repository README):
// a `coevo.config.v1` header line, `key = value` pairs, `#` comments.
// Throws ParseError with a line number on malformed lines, ConfigError on
// unknown or duplicated keys. The result is validated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Built-in scenarios, also shipped as files under configs/.
ExperimentConfig make_reference_config();
ExperimentConfig make_asymmetric_sc_config();
ExperimentConfig make_complementarity_config();

// Ensemble-averaging sweep parameters (coevo.sweep.v1 config files).
struct SweepConfig {
  std::vector<int> n_values{1, 2, 4, 8, 16};
  int k_samples = 16;
  double bias_std = 1.0;
  double noise_std = 0.5;
  int trials = 10000;
  std::uint64_t seed = 1;
  int vocab_size = 9;

  void validate() const;

  bool operator==(const SweepConfig&) const = default;
};

SweepConfig parse_sweep_config(const std::string& text);
SweepConfig load_sweep_config(const std::string& path);

}  // namespace coevo
