#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coevo/config.hpp"
#include "coevo/policy.hpp"
#include "coevo/rewards.hpp"

// The coevolution loop: per step and question, every model samples answers,
// a pseudo-label is voted, consensus rewards feed a group-relative clipped
// policy update per model. Three modes share the loop and differ only in the
// labeling rule; all sampling uses per-(step, slot, model, question) random
// streams so modes with identical draws stay bit-comparable.

namespace coevo {

struct EvalReport {
  std::map<std::string, double> per_model_accuracy;
  double group_vote_accuracy = 0.0;

  bool operator==(const EvalReport&) const = default;
};

struct TraceStep {
  int step = 0;  // 1-based
  StepMetrics metrics;
  int samples_per_pool = 0;  // reward-estimation draws per voting pool
  std::optional<EvalReport> eval_train;
  std::optional<EvalReport> eval_holdout;

  bool operator==(const TraceStep&) const = default;
};

struct TrainingTrace {
  Mode mode = Mode::kRlccf;
  std::uint64_t seed = 1;
  EvalReport initial_train;  // evaluated before any update
  std::optional<EvalReport> initial_holdout;
  std::vector<TraceStep> steps;  // length equals executed steps

  // The last step always carries an evaluation.
  const EvalReport& final_train() const { return *steps.back().eval_train; }
  const EvalReport& final_holdout() const { return *steps.back().eval_holdout; }

  bool operator==(const TrainingTrace&) const = default;
};

struct ExperimentResult {
  TrainingTrace trace;
  std::vector<CategoricalPolicy> final_policies;
  std::vector<TaskInstance> train_tasks;
  std::vector<TaskInstance> holdout_tasks;
};

// Synthetic tasks with a shared vocabulary ordered so that lexicographic
// answer order equals answer-line order; ground-truth indices are uniform
// per task, domains assigned round-robin. Question ids are prefix + padded
// index, so distinct prefixes give disjoint id spaces and task streams.
std::vector<TaskInstance> make_tasks(int count, int vocab_size,
                                     const std::vector<std::string>& domains, std::uint64_t seed,
                                     const std::string& id_prefix);

std::map<std::string, std::string> ground_truth_of(const std::vector<TaskInstance>& tasks);

// Frozen-policy evaluation: per-model mean per-sample accuracy plus the
// unweighted majority vote over the pooled samples of all models. An empty
// task list reports zeros.
EvalReport evaluate(const std::vector<CategoricalPolicy>& policies,
                    const std::vector<TaskInstance>& tasks, int eval_samples, std::uint64_t seed);

// Full run: validates the configuration first, evaluates at step 0, then
// every eval_every steps and at the final step, on both the training tasks
// and the held-out tasks.
ExperimentResult run_experiment_full(const ExperimentConfig& config);

// Mode-forcing wrappers over the shared loop.
TrainingTrace run_rlccf(const ExperimentConfig& config);
TrainingTrace run_ttrl_single(const ExperimentConfig& config);
TrainingTrace run_ablation_simple_vote(const ExperimentConfig& config);
TrainingTrace run_experiment(const ExperimentConfig& config);

// coevo.trace.v1: a header echoing the configuration, a step-0 record with
// the initial evaluations, then one record per executed step.
std::string trace_to_jsonl(const TrainingTrace& trace, const ExperimentConfig& config);

}  // namespace coevo
