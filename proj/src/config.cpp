#include "coevo/config.hpp"

#include <algorithm>
#include <cstddef>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coevo/errors.hpp"
#include "coevo/io.hpp"

namespace coevo {

namespace {

constexpr const char* kConfigSchema = "coevo.config.v1";
constexpr const char* kSweepSchema = "coevo.sweep.v1";

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  std::istringstream in(value);
  while (std::getline(in, current, ',')) {
    current = trim(current);
    if (!current.empty()) items.push_back(current);
  }
  return items;
}

long parse_long(const std::string& value, const std::string& key, long line) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("value for '" + key + "' is not an integer: '" + value + "'", line);
  }
}

double parse_real(const std::string& value, const std::string& key, long line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("value for '" + key + "' is not a number: '" + value + "'", line);
  }
}

std::vector<double> parse_real_list(const std::string& value, const std::string& key, long line) {
  std::vector<double> out;
  for (const std::string& item : split_list(value)) {
    out.push_back(parse_real(item, key, line));
  }
  return out;
}

// Walks `key = value` lines after the schema header line, calling
// handle(key, value, line_number) per pair. Duplicate keys outside
// `repeatable` are rejected.
template <typename Fn>
void walk_key_values(const std::string& text, const char* schema,
                     const std::set<std::string>& repeatable, Fn&& handle) {
  std::set<std::string> seen;
  bool header_seen = false;
  std::istringstream in(text);
  std::string raw;
  long line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;

    if (!header_seen) {
      if (line != schema) {
        throw ParseError(std::string("expected '") + schema + "' header, got '" + line + "'",
                         line_number);
      }
      header_seen = true;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value', got '" + line + "'", line_number);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("missing key before '='", line_number);
    }
    if (repeatable.find(key) == repeatable.end() && !seen.insert(key).second) {
      throw ConfigError("duplicate key '" + key + "'", {key});
    }
    handle(key, value, line_number);
  }
  if (!header_seen) {
    throw ParseError(std::string("missing '") + schema + "' header", line_number);
  }
}

SkillEntry parse_skill(const std::string& value, long line) {
  std::istringstream in(value);
  SkillEntry entry;
  if (!(in >> entry.model_index >> entry.domain >> entry.competence)) {
    throw ParseError("skill entries need '<model index> <domain> <competence>', got '" + value +
                         "'",
                     line);
  }
  std::string extra;
  if (in >> extra) {
    throw ParseError("trailing token '" + extra + "' after skill entry", line);
  }
  return entry;
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kRlccf:
      return "rlccf";
    case Mode::kTtrlSingle:
      return "ttrl_single";
    case Mode::kRlccfSimpleVote:
      return "rlccf_simple_vote";
  }
  return "rlccf";
}

Mode parse_mode(const std::string& name) {
  if (name == "rlccf") return Mode::kRlccf;
  if (name == "ttrl_single") return Mode::kTtrlSingle;
  if (name == "rlccf_simple_vote") return Mode::kRlccfSimpleVote;
  throw ConfigError("unknown mode '" + name +
                        "' (expected rlccf, ttrl_single, or rlccf_simple_vote)",
                    {"mode"});
}

BiasModelSpec ExperimentConfig::bias_spec() const {
  BiasModelSpec spec;
  spec.n_models = n_models;
  spec.k_samples = samples_per_model;
  spec.bias_std = bias_std;
  spec.noise_std = noise_std;
  spec.noise_std_per_model = noise_std_per_model;
  spec.bias_std_per_model = bias_std_per_model;
  spec.fixed_biases = fixed_biases;
  return spec;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  auto flag = [&bad](const char* key) {
    if (std::find(bad.begin(), bad.end(), key) == bad.end()) bad.emplace_back(key);
  };

  if (steps < 1) flag("steps");
  if (batch_size < 1) flag("batch_size");
  if (n_models < 1) flag("n_models");
  if (samples_per_model < 1) flag("samples_per_model");
  if (vote_budget < 0 || (vote_budget > 0 && vote_budget < samples_per_model)) {
    flag("vote_budget");
  }
  if (train_tasks < 1) flag("train_tasks");
  if (eval_tasks < 0) flag("eval_tasks");
  if (vocab_size < 2) flag("vocab_size");
  if (domains.empty()) flag("domains");
  if (eval_every < 1) flag("eval_every");
  if (eval_samples < 1) flag("eval_samples");
  if (invalid_fraction < 0.0 || invalid_fraction >= 1.0) flag("invalid_fraction");
  if (bias_std < 0.0) flag("bias_std");
  if (noise_std <= 0.0) flag("noise_std");
  if (!noise_std_per_model.empty()) {
    if (noise_std_per_model.size() != static_cast<std::size_t>(n_models)) {
      flag("noise_std_per_model");
    }
    for (double v : noise_std_per_model) {
      if (v <= 0.0) flag("noise_std_per_model");
    }
  }
  if (!bias_std_per_model.empty()) {
    if (bias_std_per_model.size() != static_cast<std::size_t>(n_models)) {
      flag("bias_std_per_model");
    }
    for (double v : bias_std_per_model) {
      if (v < 0.0) flag("bias_std_per_model");
    }
  }
  if (!fixed_biases.empty() && fixed_biases.size() != static_cast<std::size_t>(n_models)) {
    flag("fixed_biases");
  }
  for (const SkillEntry& entry : skills) {
    if (entry.model_index < 0 || entry.model_index >= n_models) flag("skill");
    if (entry.competence <= 0.0) flag("skill");
    if (std::find(domains.begin(), domains.end(), entry.domain) == domains.end()) flag("skill");
  }
  if (clip.epsilon <= 0.0 || clip.epsilon >= 1.0) flag("epsilon");
  if (clip.beta < 0.0) flag("beta");
  if (clip.inner_epochs < 1) flag("inner_epochs");
  if (clip.learning_rate < 0.0) flag("learning_rate");

  if (!bad.empty()) {
    throw ConfigError("invalid experiment configuration", bad);
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  walk_key_values(text, kConfigSchema, {"skill"}, [&config](const std::string& key,
                                                            const std::string& value,
                                                            long line_number) {
    if (key == "mode") {
      config.mode = parse_mode(value);
    } else if (key == "modes") {
      for (const std::string& item : split_list(value)) {
        config.modes.push_back(parse_mode(item));
      }
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_long(value, key, line_number));
    } else if (key == "seeds") {
      for (const std::string& item : split_list(value)) {
        config.seeds.push_back(static_cast<std::uint64_t>(parse_long(item, key, line_number)));
      }
    } else if (key == "steps") {
      config.steps = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "batch_size") {
      config.batch_size = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "n_models") {
      config.n_models = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "samples_per_model") {
      config.samples_per_model = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "vote_budget") {
      config.vote_budget = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "train_tasks") {
      config.train_tasks = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "eval_tasks") {
      config.eval_tasks = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "vocab_size") {
      config.vocab_size = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "domains") {
      config.domains = split_list(value);
    } else if (key == "eval_every") {
      config.eval_every = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "eval_samples") {
      config.eval_samples = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "invalid_fraction") {
      config.invalid_fraction = parse_real(value, key, line_number);
    } else if (key == "bias_std") {
      config.bias_std = parse_real(value, key, line_number);
    } else if (key == "noise_std") {
      config.noise_std = parse_real(value, key, line_number);
    } else if (key == "noise_std_per_model") {
      config.noise_std_per_model = parse_real_list(value, key, line_number);
    } else if (key == "bias_std_per_model") {
      config.bias_std_per_model = parse_real_list(value, key, line_number);
    } else if (key == "fixed_biases") {
      config.fixed_biases = parse_real_list(value, key, line_number);
    } else if (key == "skill") {
      config.skills.push_back(parse_skill(value, line_number));
    } else if (key == "epsilon") {
      config.clip.epsilon = parse_real(value, key, line_number);
    } else if (key == "beta") {
      config.clip.beta = parse_real(value, key, line_number);
    } else if (key == "inner_epochs") {
      config.clip.inner_epochs = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "learning_rate") {
      config.clip.learning_rate = parse_real(value, key, line_number);
    } else {
      throw ConfigError("unknown key '" + key + "' at line " + std::to_string(line_number),
                        {key});
    }
  });

  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

void SweepConfig::validate() const {
  std::vector<std::string> bad;
  auto flag = [&bad](const char* key) {
    if (std::find(bad.begin(), bad.end(), key) == bad.end()) bad.emplace_back(key);
  };
  if (n_values.empty()) flag("n_values");
  for (int n : n_values) {
    if (n < 1) flag("n_values");
  }
  if (k_samples < 1) flag("k_samples");
  if (bias_std < 0.0) flag("bias_std");
  if (noise_std < 0.0) flag("noise_std");
  if (trials < 100) flag("trials");
  if (vocab_size < 2) flag("vocab_size");
  if (!bad.empty()) {
    throw ConfigError("invalid sweep configuration", bad);
  }
}

SweepConfig parse_sweep_config(const std::string& text) {
  SweepConfig config;
  walk_key_values(text, kSweepSchema, {}, [&config](const std::string& key,
                                                    const std::string& value, long line_number) {
    if (key == "n_values") {
      config.n_values.clear();
      for (const std::string& item : split_list(value)) {
        config.n_values.push_back(static_cast<int>(parse_long(item, key, line_number)));
      }
    } else if (key == "k_samples") {
      config.k_samples = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "bias_std") {
      config.bias_std = parse_real(value, key, line_number);
    } else if (key == "noise_std") {
      config.noise_std = parse_real(value, key, line_number);
    } else if (key == "trials") {
      config.trials = static_cast<int>(parse_long(value, key, line_number));
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_long(value, key, line_number));
    } else if (key == "vocab_size") {
      config.vocab_size = static_cast<int>(parse_long(value, key, line_number));
    } else {
      throw ConfigError("unknown key '" + key + "' at line " + std::to_string(line_number),
                        {key});
    }
  });
  config.validate();
  return config;
}

SweepConfig load_sweep_config(const std::string& path) {
  return parse_sweep_config(read_file(path));
}

// Four models spanning sharp-and-honest to diffuse-and-biased. The spread
// keeps self-consistency informative about accuracy, which is what lets the
// weighted collective vote outrun both the unweighted vote and per-model
// self-training.
ExperimentConfig make_reference_config() {
  ExperimentConfig config;
  config.mode = Mode::kRlccf;
  config.steps = 300;
  config.batch_size = 32;
  config.n_models = 4;
  config.samples_per_model = 16;
  config.train_tasks = 200;
  config.eval_tasks = 100;
  config.vocab_size = 4;
  config.eval_every = 10;
  config.eval_samples = 32;
  config.noise_std_per_model = {0.8, 1.4, 1.9, 2.4};
  config.bias_std_per_model = {0.4, 1.0, 1.3, 1.6};
  return config;
}

// One sharp on-truth model against a pair of diffuse models sharing the same
// wrong lean (and a fourth leaning far off). The coalition crowds the
// unweighted vote; consistency weighting restores the sharp model's say.
ExperimentConfig make_asymmetric_sc_config() {
  ExperimentConfig config;
  config.mode = Mode::kRlccf;
  config.steps = 150;
  config.batch_size = 48;
  config.n_models = 4;
  config.samples_per_model = 16;
  config.train_tasks = 48;
  config.eval_tasks = 48;
  config.vocab_size = 8;
  config.eval_every = 25;
  config.eval_samples = 32;
  config.fixed_biases = {0.0, 2.0, 2.0, -4.0};
  config.noise_std_per_model = {0.7, 1.3, 1.3, 1.6};
  return config;
}

// Two specialists on two domains: each is sharp where skilled and diffuse
// where not, so the collective vote beats either individual on the mix.
ExperimentConfig make_complementarity_config() {
  ExperimentConfig config;
  config.mode = Mode::kRlccf;
  config.steps = 300;
  config.batch_size = 32;
  config.n_models = 2;
  config.samples_per_model = 16;
  config.train_tasks = 200;
  config.eval_tasks = 100;
  config.vocab_size = 4;
  config.domains = {"math", "code"};
  config.eval_every = 25;
  config.eval_samples = 32;
  config.bias_std = 0.4;
  config.noise_std = 1.5;
  config.skills = {
      {0, "math", 3.0},
      {0, "code", 0.75},
      {1, "code", 3.0},
      {1, "math", 0.75},
  };
  return config;
}

}  // namespace coevo
