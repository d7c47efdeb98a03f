#include "doctest.h"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "coevo/config.hpp"
#include "coevo/errors.hpp"
#include "coevo/rng.hpp"
#include "coevo/simulation.hpp"

using namespace coevo;

namespace {

// Small but non-degenerate single-model setup shared by the mode
// equivalence checks.
ExperimentConfig single_model_config() {
  ExperimentConfig config;
  config.mode = Mode::kRlccf;
  config.seed = 5;
  config.steps = 30;
  config.batch_size = 4;
  config.n_models = 1;
  config.samples_per_model = 16;
  config.train_tasks = 10;
  config.eval_tasks = 5;
  config.vocab_size = 5;
  config.eval_every = 10;
  config.eval_samples = 16;
  config.bias_std = 0.8;
  config.noise_std = 1.2;
  return config;
}

bool traces_identical(const TrainingTrace& a, const TrainingTrace& b) {
  return a.initial_train == b.initial_train && a.initial_holdout == b.initial_holdout &&
         a.steps == b.steps;
}

}  // namespace

TEST_CASE("experiments validate their configuration up front") {
  auto config = single_model_config();
  config.steps = 0;
  CHECK_THROWS_AS(run_experiment_full(config), ConfigError);

  config = single_model_config();
  config.vote_budget = 32;  // only ttrl_single may diverge from the full pool
  CHECK_THROWS_AS(run_experiment_full(config), ConfigError);
  config.mode = Mode::kTtrlSingle;
  CHECK_NOTHROW(run_experiment_full(config));
}

TEST_CASE("task generation is deterministic and spreads domains round-robin") {
  const std::vector<std::string> domains = {"math", "code"};
  const auto tasks = make_tasks(12, 11, domains, 3, "train-");
  REQUIRE(tasks.size() == 12);
  CHECK(tasks[0].question_id == "train-0000");
  CHECK(tasks[11].question_id == "train-0011");
  CHECK(tasks[0].domain_tag == "math");
  CHECK(tasks[1].domain_tag == "code");
  CHECK(tasks[2].domain_tag == "math");
  REQUIRE(tasks[0].vocabulary.size() == 11);
  CHECK(tasks[0].vocabulary[0] == "a00");
  CHECK(tasks[0].vocabulary[10] == "a10");
  for (const auto& task : tasks) {
    CHECK(task.ground_truth_index >= 0);
    CHECK(task.ground_truth_index < 11);
    CHECK(task.ground_truth() == task.vocabulary[task.ground_truth_index]);
  }

  const auto again = make_tasks(12, 11, domains, 3, "train-");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks[i].ground_truth_index == again[i].ground_truth_index);
  }

  CHECK(ground_truth_of(tasks).size() == 12);
  CHECK_THROWS_AS(make_tasks(4, 1, domains, 3, "x-"), InputError);
  CHECK_THROWS_AS(make_tasks(4, 4, {}, 3, "x-"), InputError);
}

TEST_CASE("evaluation separates an expert from guessers") {
  const auto tasks = make_tasks(40, 4, {"math"}, 9, "q-");
  BiasModelSpec spec;
  spec.n_models = 4;
  spec.fixed_biases = {0.0, 0.0, 0.0, 0.0};
  spec.noise_std_per_model = {0.05, 50.0, 50.0, 50.0};
  const auto policies = init_policies(tasks, spec, {}, 9);

  const auto report = evaluate(policies, tasks, 32, 17);
  CHECK(report.per_model_accuracy.at("m0") == doctest::Approx(1.0));
  for (const auto& model : {"m1", "m2", "m3"}) {
    CHECK(report.per_model_accuracy.at(model) > 0.15);
    CHECK(report.per_model_accuracy.at(model) < 0.35);
  }
  // The expert's unanimous block dominates every pooled vote.
  CHECK(report.group_vote_accuracy > 0.9);
}

TEST_CASE("evaluation of an empty task list reports zeros per model") {
  BiasModelSpec spec;
  spec.n_models = 2;
  spec.fixed_biases = {0.0, 0.0};
  const auto tasks = make_tasks(1, 4, {"math"}, 1, "q-");
  const auto policies = init_policies(tasks, spec, {}, 1);
  const auto report = evaluate(policies, {}, 8, 1);
  CHECK(report.group_vote_accuracy == 0.0);
  REQUIRE(report.per_model_accuracy.size() == 2);
  CHECK(report.per_model_accuracy.at("m0") == 0.0);
}

TEST_CASE("evaluation accuracy is stable across eval seeds") {
  const auto tasks = make_tasks(50, 4, {"math"}, 21, "q-");
  BiasModelSpec spec;
  spec.n_models = 1;
  spec.fixed_biases = {0.0};
  spec.noise_std = 1.0;
  const auto policies = init_policies(tasks, spec, {}, 21);

  const auto a = evaluate(policies, tasks, 32, 100);
  const auto b = evaluate(policies, tasks, 32, 200);
  const double n_draws = 50.0 * 32.0;
  const double p = a.per_model_accuracy.at("m0");
  const double se = std::sqrt(p * (1.0 - p) / n_draws);
  CHECK(std::abs(b.per_model_accuracy.at("m0") - p) < 3.0 * se + 2.0 / n_draws);

  CHECK(evaluate(policies, tasks, 32, 100).per_model_accuracy.at("m0") == p);
}

TEST_CASE("experiments are bit-reproducible") {
  auto config = single_model_config();
  config.n_models = 2;
  config.steps = 20;

  const auto first = run_experiment_full(config);
  const auto second = run_experiment_full(config);
  CHECK(traces_identical(first.trace, second.trace));
  REQUIRE(first.final_policies.size() == 2);
  for (std::size_t m = 0; m < 2; ++m) {
    for (const auto& [qid, logits] : first.final_policies[m].logits) {
      CHECK(logits == second.final_policies[m].logits.at(qid));
    }
  }
  CHECK(trace_to_jsonl(first.trace, config) == trace_to_jsonl(second.trace, config));

  // The mode-dispatching entry point runs the same experiment.
  CHECK(traces_identical(run_experiment(config), first.trace));
}

TEST_CASE("a zero learning rate freezes the policies") {
  auto config = single_model_config();
  config.steps = 10;
  config.clip.learning_rate = 0.0;
  const auto result = run_experiment_full(config);
  for (const auto& policy : result.final_policies) {
    for (const auto& [qid, logits] : policy.logits) {
      CHECK(logits == policy.ref_logits.at(qid));
    }
  }
  REQUIRE(result.trace.steps.size() == 10);
  for (const auto& step : result.trace.steps) {
    CHECK(step.metrics.label_accuracy >= 0.0);
    CHECK(step.metrics.label_accuracy <= 1.0);
    CHECK(step.metrics.collective_consistency > 0.0);
  }
}

TEST_CASE("a deterministic self-trainer receives no learning signal") {
  // Every sample lands on the same answer, so rewards have zero variance
  // and the KL term starts at its optimum: the update is exactly zero.
  ExperimentConfig config;
  config.mode = Mode::kTtrlSingle;
  config.steps = 8;
  config.batch_size = 4;
  config.n_models = 1;
  config.samples_per_model = 16;
  config.train_tasks = 6;
  config.eval_tasks = 0;
  config.vocab_size = 4;
  config.eval_every = 4;
  config.eval_samples = 8;
  config.fixed_biases = {0.0};
  config.noise_std = 0.05;
  const auto result = run_experiment_full(config);
  for (const auto& [qid, logits] : result.final_policies[0].logits) {
    CHECK(logits == result.final_policies[0].ref_logits.at(qid));
  }
  for (const auto& step : result.trace.steps) {
    CHECK(step.metrics.per_model_sc.at("m0") == doctest::Approx(1.0));
    CHECK(step.metrics.collective_consistency == doctest::Approx(1.0));
  }
}

TEST_CASE("self-training entrenches a systematic bias instead of fixing it") {
  ExperimentConfig config;
  config.mode = Mode::kTtrlSingle;
  config.seed = 3;
  config.steps = 60;
  config.batch_size = 8;
  config.n_models = 1;
  config.samples_per_model = 16;
  config.train_tasks = 8;
  config.eval_tasks = 0;
  config.vocab_size = 6;
  config.eval_every = 30;
  config.eval_samples = 32;
  config.fixed_biases = {1.0};  // consistently one step off the truth
  config.noise_std = 1.0;
  const auto result = run_experiment_full(config);

  const auto& policy = result.final_policies[0];
  int entrenched = 0;
  int interior = 0;
  for (const auto& task : result.train_tasks) {
    const int wrong = task.ground_truth_index + 1;
    if (wrong >= config.vocab_size) continue;  // the offset clamps at the edge
    ++interior;
    const Eigen::VectorXd initial = softmax(policy.ref_logits.at(task.question_id));
    const Eigen::VectorXd final_probs = policy.probs(task.question_id);
    if (final_probs[wrong] > initial[wrong] + 0.1) ++entrenched;
    CHECK(final_probs[task.ground_truth_index] < 0.5);
  }
  REQUIRE(interior >= 4);
  CHECK(entrenched >= interior - 1);

  // Consensus with itself rises while truth alignment does not.
  CHECK(result.trace.steps.back().metrics.per_model_sc.at("m0") >
        result.trace.steps.front().metrics.per_model_sc.at("m0"));
  CHECK(result.trace.final_train().per_model_accuracy.at("m0") <
        result.trace.initial_train.per_model_accuracy.at("m0") + 0.05);
}

TEST_CASE("pool sizes follow the resolved vote budget") {
  auto config = single_model_config();
  config.n_models = 4;
  config.steps = 2;

  const auto rlccf = run_experiment_full(config);
  for (const auto& step : rlccf.trace.steps) CHECK(step.samples_per_pool == 64);

  config.mode = Mode::kTtrlSingle;
  const auto ttrl_default = run_experiment_full(config);
  for (const auto& step : ttrl_default.trace.steps) CHECK(step.samples_per_pool == 64);

  config.vote_budget = 32;
  const auto ttrl_half = run_experiment_full(config);
  for (const auto& step : ttrl_half.trace.steps) CHECK(step.samples_per_pool == 32);
}

TEST_CASE("with one model every mode is the same algorithm") {
  // One model's sc rescales its own tally by a positive constant, so the
  // weighted vote, the simple vote, and self-training on the full pool all
  // pick the same labels and produce identical updates, draw for draw.
  const auto config = single_model_config();
  const auto weighted = run_rlccf(config);
  const auto simple = run_ablation_simple_vote(config);
  const auto self_train = run_ttrl_single(config);

  CHECK(weighted.mode == Mode::kRlccf);
  CHECK(simple.mode == Mode::kRlccfSimpleVote);
  CHECK(self_train.mode == Mode::kTtrlSingle);

  REQUIRE(weighted.steps.size() == simple.steps.size());
  REQUIRE(weighted.steps.size() == self_train.steps.size());
  CHECK(traces_identical(weighted, simple));
  CHECK(traces_identical(weighted, self_train));
}

TEST_CASE("unanimous models make the weighted and simple modes coincide") {
  // Near-zero spread pins each model on its own center, so every sc is 1 and
  // weighting cannot change any tally.
  ExperimentConfig config;
  config.seed = 11;
  config.steps = 12;
  config.batch_size = 4;
  config.n_models = 3;
  config.samples_per_model = 16;
  config.train_tasks = 9;
  config.eval_tasks = 4;
  config.vocab_size = 6;
  config.eval_every = 6;
  config.eval_samples = 8;
  config.fixed_biases = {0.0, 1.0, 2.0};
  config.noise_std = 0.05;

  const auto weighted = run_rlccf(config);
  const auto simple = run_ablation_simple_vote(config);
  CHECK(traces_identical(weighted, simple));
}

TEST_CASE("trace records carry the run's shape and cadence") {
  auto config = single_model_config();
  config.n_models = 2;
  config.steps = 25;
  config.eval_every = 10;
  const auto result = run_experiment_full(config);
  const auto& trace = result.trace;

  REQUIRE(trace.steps.size() == 25);
  CHECK(trace.initial_holdout.has_value());
  for (const auto& step : trace.steps) {
    const bool expect_eval = step.step % 10 == 0 || step.step == 25;
    CHECK(step.eval_train.has_value() == expect_eval);
    CHECK(step.eval_holdout.has_value() == expect_eval);
    CHECK(static_cast<int>(step.metrics.per_model_sc.size()) == 2);
  }
  CHECK(trace.final_train().group_vote_accuracy ==
        trace.steps.back().eval_train->group_vote_accuracy);
  CHECK(trace.final_holdout().per_model_accuracy.size() == 2);

  const auto text = trace_to_jsonl(trace, config);
  std::istringstream lines(text);
  std::string line;
  int line_count = 0;
  nlohmann::json header;
  while (std::getline(lines, line)) {
    const auto record = nlohmann::json::parse(line);
    if (line_count == 0) header = record;
    ++line_count;
  }
  CHECK(line_count == 1 + 1 + 25);
  CHECK(header["schema"] == "coevo.trace.v1");
  CHECK(header["mode"] == "rlccf");
  CHECK(header["n_models"] == 2);
  CHECK(header["vote_budget"] == 32);
  CHECK(header["seed"] == 5);
}

TEST_CASE("a run without holdout tasks omits holdout records") {
  auto config = single_model_config();
  config.eval_tasks = 0;
  config.steps = 4;
  config.eval_every = 2;
  const auto result = run_experiment_full(config);
  CHECK_FALSE(result.trace.initial_holdout.has_value());
  CHECK_FALSE(result.trace.steps.back().eval_holdout.has_value());

  const auto text = trace_to_jsonl(result.trace, config);
  CHECK(text.find("eval_holdout") == std::string::npos);
  CHECK(text.find("eval_train") != std::string::npos);
}
