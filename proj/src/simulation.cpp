#include "coevo/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "coevo/errors.hpp"
#include "coevo/grpo.hpp"
#include "coevo/rng.hpp"
#include "coevo/voting.hpp"

namespace coevo {

namespace {

using nlohmann::json;

std::string padded(int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  }
  return digits;
}

int digits_of(int max_value) {
  int width = 1;
  while (max_value >= 10) {
    max_value /= 10;
    ++width;
  }
  return width;
}

int answer_index(const TaskInstance& task, const std::string& answer) {
  for (std::size_t j = 0; j < task.vocabulary.size(); ++j) {
    if (task.vocabulary[j] == answer) return static_cast<int>(j);
  }
  throw ShapeMismatchError("answer '" + answer + "' is not in the vocabulary of " +
                           task.question_id);
}

// First `k` slots of one model's draw sequence as vocabulary indices;
// invalid slots stay empty but keep their position.
std::vector<std::optional<int>> slice_indices(const std::vector<AnswerSample>& raw,
                                              const TaskInstance& task, int k) {
  std::vector<std::optional<int>> indices(static_cast<std::size_t>(k));
  for (const AnswerSample& sample : raw) {
    if (sample.sample_index < k && sample.valid()) {
      indices[static_cast<std::size_t>(sample.sample_index)] = answer_index(task, *sample.answer);
    }
  }
  return indices;
}

Eigen::VectorXd rewards_as_vector(const std::vector<int>& rewards) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(rewards.size()));
  for (std::size_t i = 0; i < rewards.size(); ++i) r[static_cast<Eigen::Index>(i)] = rewards[i];
  return r;
}

void grpo_update(CategoricalPolicy& policy, const TaskInstance& task,
                 const std::vector<std::optional<int>>& indices,
                 const Eigen::VectorXd& advantages, const Eigen::VectorXd& probs_old,
                 const ClipConfig& clip) {
  const Eigen::VectorXd probs_ref = policy.ref_probs(task.question_id);
  for (int epoch = 0; epoch < clip.inner_epochs; ++epoch) {
    const Eigen::VectorXd gradient = objective_gradient(
        indices, advantages, policy.logits_for(task.question_id), probs_old, probs_ref, clip);
    apply_update(policy, task.question_id, gradient, clip.learning_rate);
  }
}

json eval_to_json(const EvalReport& report) {
  json value;
  value["group"] = report.group_vote_accuracy;
  value["models"] = json::object();
  for (const auto& [model, accuracy] : report.per_model_accuracy) {
    value["models"][model] = accuracy;
  }
  return value;
}

// Per-step accumulator; turns per-question results into StepMetrics.
struct MetricsAccumulator {
  std::vector<PseudoLabel> labels;
  long reward_bits = 0;
  long reward_agreements = 0;
  double cc_sum = 0.0;
  int cc_count = 0;
  std::map<std::string, double> sc_sum;
  std::map<std::string, int> sc_count;

  void add_pool_metrics(const VotePool& union_pool,
                        const std::vector<RewardGroup>& update_groups,
                        const std::map<std::string, std::string>& truth) {
    if (union_pool.valid_count() > 0) {
      cc_sum += collective_consistency(union_pool);
      ++cc_count;
      for (const auto& [model, score] : self_consistency(union_pool)) {
        if (score.valid_count > 0) {
          sc_sum[model] += score.sc;
          ++sc_count[model];
        }
      }
    }
    if (!update_groups.empty()) {
      long bits = 0;
      for (const RewardGroup& group : update_groups) {
        bits += static_cast<long>(group.rewards.size());
      }
      const std::vector<VotePool> pools{union_pool};
      const double fraction = reward_accuracy(update_groups, pools, truth);
      reward_bits += bits;
      reward_agreements += std::llround(fraction * static_cast<double>(bits));
    }
  }

  StepMetrics finish(const std::map<std::string, std::string>& truth) const {
    StepMetrics metrics;
    if (!labels.empty()) metrics.label_accuracy = label_accuracy(labels, truth);
    if (reward_bits > 0) {
      metrics.reward_accuracy =
          static_cast<double>(reward_agreements) / static_cast<double>(reward_bits);
    }
    if (cc_count > 0) metrics.collective_consistency = cc_sum / cc_count;
    for (const auto& [model, total] : sc_sum) {
      metrics.per_model_sc[model] = total / sc_count.at(model);
    }
    return metrics;
  }
};

}  // namespace

std::vector<TaskInstance> make_tasks(int count, int vocab_size,
                                     const std::vector<std::string>& domains, std::uint64_t seed,
                                     const std::string& id_prefix) {
  if (count < 0 || vocab_size < 2 || domains.empty()) {
    throw InputError("make_tasks: need count >= 0, vocab_size >= 2, and a domain");
  }
  std::vector<std::string> vocabulary;
  vocabulary.reserve(static_cast<std::size_t>(vocab_size));
  const int answer_width = digits_of(vocab_size - 1);
  for (int j = 0; j < vocab_size; ++j) {
    vocabulary.push_back("a" + padded(j, answer_width));
  }

  const int id_width = std::max(4, digits_of(count > 0 ? count - 1 : 0));
  std::vector<TaskInstance> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    TaskInstance task;
    task.question_id = id_prefix + padded(i, id_width);
    task.domain_tag = domains[static_cast<std::size_t>(i) % domains.size()];
    task.vocabulary = vocabulary;
    auto engine = stream(seed, streams::kTaskGen, fnv1a64(id_prefix), i);
    task.ground_truth_index =
        std::min(vocab_size - 1, static_cast<int>(uniform01(engine) * vocab_size));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::map<std::string, std::string> ground_truth_of(const std::vector<TaskInstance>& tasks) {
  std::map<std::string, std::string> truth;
  for (const TaskInstance& task : tasks) truth[task.question_id] = task.ground_truth();
  return truth;
}

EvalReport evaluate(const std::vector<CategoricalPolicy>& policies,
                    const std::vector<TaskInstance>& tasks, int eval_samples,
                    std::uint64_t seed) {
  EvalReport report;
  for (const CategoricalPolicy& policy : policies) report.per_model_accuracy[policy.model_id] = 0.0;
  if (tasks.empty()) return report;

  std::map<std::string, long> correct;
  int group_correct = 0;
  for (const TaskInstance& task : tasks) {
    VotePool pool;
    pool.question_id = task.question_id;
    pool.k_requested = eval_samples;
    for (std::size_t m = 0; m < policies.size(); ++m) {
      auto engine = stream(seed, streams::kEvalSample, m, fnv1a64(task.question_id));
      const auto samples = sample_answers(policies[m], task, eval_samples, 0.0, engine);
      for (const AnswerSample& sample : samples) {
        pool.add(sample);
        if (*sample.answer == task.ground_truth()) ++correct[policies[m].model_id];
      }
    }
    if (simple_vote(pool).answer == task.ground_truth()) ++group_correct;
  }

  const double draws = static_cast<double>(tasks.size()) * eval_samples;
  for (auto& [model, accuracy] : report.per_model_accuracy) {
    accuracy = static_cast<double>(correct[model]) / draws;
  }
  report.group_vote_accuracy = static_cast<double>(group_correct) / static_cast<double>(tasks.size());
  return report;
}

ExperimentResult run_experiment_full(const ExperimentConfig& config) {
  config.validate();
  const Mode mode = config.mode;
  const int n_models = config.n_models;
  const int k_update = config.samples_per_model;
  const int budget = config.resolved_vote_budget();
  if (mode != Mode::kTtrlSingle && budget != n_models * k_update) {
    throw ConfigError("vote_budget must equal n_models * samples_per_model outside ttrl_single",
                      {"vote_budget"});
  }

  ExperimentResult result;
  result.train_tasks = make_tasks(config.train_tasks, config.vocab_size, config.domains,
                                  config.seed, "train-");
  result.holdout_tasks =
      make_tasks(config.eval_tasks, config.vocab_size, config.domains, config.seed, "eval-");

  std::vector<TaskInstance> all_tasks = result.train_tasks;
  all_tasks.insert(all_tasks.end(), result.holdout_tasks.begin(), result.holdout_tasks.end());

  std::vector<std::map<std::string, double>> skill_profiles(
      static_cast<std::size_t>(n_models));
  for (const SkillEntry& entry : config.skills) {
    skill_profiles[static_cast<std::size_t>(entry.model_index)][entry.domain] = entry.competence;
  }

  std::vector<CategoricalPolicy> policies =
      init_policies(all_tasks, config.bias_spec(), skill_profiles, config.seed);

  const std::map<std::string, std::string> truth = ground_truth_of(result.train_tasks);

  TrainingTrace& trace = result.trace;
  trace.mode = mode;
  trace.seed = config.seed;

  const auto run_eval = [&](int step, std::optional<EvalReport>& train_slot,
                            std::optional<EvalReport>& holdout_slot) {
    const std::uint64_t eval_seed = derive_seed(config.seed, streams::kEvalSample, step);
    train_slot = evaluate(policies, result.train_tasks, config.eval_samples, eval_seed);
    if (!result.holdout_tasks.empty()) {
      holdout_slot = evaluate(policies, result.holdout_tasks, config.eval_samples, eval_seed);
    }
  };

  {
    std::optional<EvalReport> initial_train;
    run_eval(0, initial_train, trace.initial_holdout);
    trace.initial_train = *initial_train;
  }

  const ClipConfig& clip = config.clip;
  for (int step = 1; step <= config.steps; ++step) {
    MetricsAccumulator accumulator;
    int samples_per_pool = 0;

    for (int slot = 0; slot < config.batch_size; ++slot) {
      const long task_index =
          (static_cast<long>(step - 1) * config.batch_size + slot) % config.train_tasks;
      const TaskInstance& task = result.train_tasks[static_cast<std::size_t>(task_index)];

      // Every mode draws through the same per-(step, slot, model, question)
      // streams, so runs that request the same draw counts stay comparable
      // sample for sample.
      std::vector<std::vector<AnswerSample>> raw(static_cast<std::size_t>(n_models));
      std::vector<Eigen::VectorXd> probs_old(static_cast<std::size_t>(n_models));
      const int draws = mode == Mode::kTtrlSingle ? budget : k_update;
      samples_per_pool = draws == k_update ? n_models * k_update : budget;
      for (int m = 0; m < n_models; ++m) {
        probs_old[static_cast<std::size_t>(m)] = policies[static_cast<std::size_t>(m)].probs(task.question_id);
        auto engine = stream(config.seed, streams::kTrainSample, step, slot, m,
                             fnv1a64(task.question_id));
        raw[static_cast<std::size_t>(m)] = sample_answers(
            policies[static_cast<std::size_t>(m)], task, draws, config.invalid_fraction, engine);
      }

      // Union of the per-model update slices; carries this occurrence's
      // SC / consistency / reward-audit metrics in every mode.
      VotePool union_pool;
      union_pool.question_id = task.question_id;
      union_pool.k_requested = k_update;
      for (int m = 0; m < n_models; ++m) {
        for (const AnswerSample& sample : raw[static_cast<std::size_t>(m)]) {
          if (sample.sample_index < k_update) union_pool.add(sample);
        }
      }

      std::vector<RewardGroup> update_groups;
      if (mode == Mode::kTtrlSingle) {
        for (int m = 0; m < n_models; ++m) {
          CategoricalPolicy& policy = policies[static_cast<std::size_t>(m)];
          VotePool own_pool;
          own_pool.question_id = task.question_id;
          own_pool.k_requested = budget;
          for (const AnswerSample& sample : raw[static_cast<std::size_t>(m)]) own_pool.add(sample);
          if (own_pool.valid_count() == 0) continue;

          const PseudoLabel label = simple_vote(own_pool);
          accumulator.labels.push_back(label);

          VotePool update_pool;
          update_pool.question_id = task.question_id;
          update_pool.k_requested = k_update;
          for (const AnswerSample& sample : raw[static_cast<std::size_t>(m)]) {
            if (sample.sample_index < k_update) update_pool.add(sample);
          }
          std::vector<RewardGroup> groups = binary_rewards(update_pool, label);
          const Eigen::VectorXd advantages =
              normalize_advantages(rewards_as_vector(groups.front().rewards));
          grpo_update(policy, task, slice_indices(raw[static_cast<std::size_t>(m)], task, k_update),
                      advantages, probs_old[static_cast<std::size_t>(m)], clip);
          update_groups.push_back(std::move(groups.front()));
        }
      } else if (union_pool.valid_count() > 0) {
        const auto scores = self_consistency(union_pool);
        const PseudoLabel label = mode == Mode::kRlccf ? sc_weighted_vote(union_pool, scores)
                                                       : simple_vote(union_pool);
        accumulator.labels.push_back(label);
        update_groups = binary_rewards(union_pool, label);
        for (int m = 0; m < n_models; ++m) {
          CategoricalPolicy& policy = policies[static_cast<std::size_t>(m)];
          const auto group_it =
              std::find_if(update_groups.begin(), update_groups.end(),
                           [&](const RewardGroup& g) { return g.model_id == policy.model_id; });
          const Eigen::VectorXd advantages =
              normalize_advantages(rewards_as_vector(group_it->rewards));
          grpo_update(policy, task, slice_indices(raw[static_cast<std::size_t>(m)], task, k_update),
                      advantages, probs_old[static_cast<std::size_t>(m)], clip);
        }
      }

      accumulator.add_pool_metrics(union_pool, update_groups, truth);
    }

    TraceStep trace_step;
    trace_step.step = step;
    trace_step.metrics = accumulator.finish(truth);
    trace_step.samples_per_pool = samples_per_pool;
    if (step % config.eval_every == 0 || step == config.steps) {
      run_eval(step, trace_step.eval_train, trace_step.eval_holdout);
    }
    trace.steps.push_back(std::move(trace_step));
  }

  result.final_policies = std::move(policies);
  return result;
}

TrainingTrace run_rlccf(const ExperimentConfig& config) {
  ExperimentConfig forced = config;
  forced.mode = Mode::kRlccf;
  return run_experiment_full(forced).trace;
}

TrainingTrace run_ttrl_single(const ExperimentConfig& config) {
  ExperimentConfig forced = config;
  forced.mode = Mode::kTtrlSingle;
  return run_experiment_full(forced).trace;
}

TrainingTrace run_ablation_simple_vote(const ExperimentConfig& config) {
  ExperimentConfig forced = config;
  forced.mode = Mode::kRlccfSimpleVote;
  return run_experiment_full(forced).trace;
}

TrainingTrace run_experiment(const ExperimentConfig& config) {
  return run_experiment_full(config).trace;
}

std::string trace_to_jsonl(const TrainingTrace& trace, const ExperimentConfig& config) {
  json header;
  header["schema"] = "coevo.trace.v1";
  header["mode"] = mode_name(trace.mode);
  header["seed"] = trace.seed;
  header["steps"] = config.steps;
  header["batch_size"] = config.batch_size;
  header["n_models"] = config.n_models;
  header["samples_per_model"] = config.samples_per_model;
  header["vote_budget"] = config.resolved_vote_budget();
  header["train_tasks"] = config.train_tasks;
  header["eval_tasks"] = config.eval_tasks;
  header["vocab_size"] = config.vocab_size;
  header["eval_every"] = config.eval_every;
  header["eval_samples"] = config.eval_samples;
  header["invalid_fraction"] = config.invalid_fraction;

  std::string out = header.dump() + "\n";

  json initial;
  initial["step"] = 0;
  initial["eval_train"] = eval_to_json(trace.initial_train);
  if (trace.initial_holdout) initial["eval_holdout"] = eval_to_json(*trace.initial_holdout);
  out += initial.dump() + "\n";

  for (const TraceStep& step : trace.steps) {
    json record;
    record["step"] = step.step;
    record["label_accuracy"] = step.metrics.label_accuracy;
    record["reward_accuracy"] = step.metrics.reward_accuracy;
    record["collective_consistency"] = step.metrics.collective_consistency;
    record["sc"] = json::object();
    for (const auto& [model, sc] : step.metrics.per_model_sc) record["sc"][model] = sc;
    record["samples_per_pool"] = step.samples_per_pool;
    if (step.eval_train) record["eval_train"] = eval_to_json(*step.eval_train);
    if (step.eval_holdout) record["eval_holdout"] = eval_to_json(*step.eval_holdout);
    out += record.dump() + "\n";
  }
  return out;
}

}  // namespace coevo
