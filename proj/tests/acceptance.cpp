// Acceptance gate: one check per release criterion, each printing a PASS or
// FAIL line with the measured quantities. Exits nonzero if any check fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "coevo/bias_reduction.hpp"
#include "coevo/config.hpp"
#include "coevo/errors.hpp"
#include "coevo/grpo.hpp"
#include "coevo/io.hpp"
#include "coevo/policy.hpp"
#include "coevo/records.hpp"
#include "coevo/rewards.hpp"
#include "coevo/rng.hpp"
#include "coevo/simulation.hpp"
#include "coevo/voting.hpp"

namespace {

using namespace coevo;

struct CheckFailure {
  std::string detail;
};

void require(bool ok, const std::string& detail) {
  if (!ok) throw CheckFailure{detail};
}

std::string fmt(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4f", value);
  return buffer;
}

std::string fmt_sci(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2e", value);
  return buffer;
}

AnswerSample make_sample(const std::string& question, const std::string& model, int index,
                         std::optional<std::string> answer) {
  AnswerSample s;
  s.question_id = question;
  s.model_id = model;
  s.sample_index = index;
  s.answer = std::move(answer);
  return s;
}

VotePool random_pool(std::mt19937_64& g, const std::string& question_id) {
  const int n_models = 1 + static_cast<int>(uniform01(g) * 5);
  const int k = 1 + static_cast<int>(uniform01(g) * 8);
  VotePool pool;
  pool.question_id = question_id;
  pool.k_requested = k;
  for (int m = 0; m < n_models; ++m) {
    const std::string model_id = "m" + std::to_string(m);
    for (int i = 0; i < k; ++i) {
      std::optional<std::string> answer;
      if (uniform01(g) > 0.12) {
        answer = std::string(1, static_cast<char>('a' + static_cast<int>(uniform01(g) * 6)));
      }
      pool.add(make_sample(question_id, model_id, i, answer));
    }
    pool.per_model_samples[model_id];
  }
  return pool;
}

// Tally kept deliberately naive: walk the pool in the same order the library
// does and accumulate per-answer weights, then argmax lexicographically.
PseudoLabel oracle_vote(const VotePool& pool, const std::map<std::string, double>& weights) {
  std::map<std::string, double> tally;
  for (const auto& [model_id, samples] : pool.per_model_samples) {
    for (const auto& s : samples) tally[*s.answer] += weights.at(model_id);
  }
  PseudoLabel label;
  label.question_id = pool.question_id;
  double best = -1.0;
  for (const auto& [answer, mass] : tally) {
    if (mass > best) {
      best = mass;
      label.answer = answer;
    }
  }
  label.weighted_mass = best;
  double second = 0.0;
  for (const auto& [answer, mass] : tally) {
    if (answer != label.answer && mass > second) second = mass;
  }
  label.margin = best - second;
  for (const auto& [model_id, samples] : pool.per_model_samples) {
    for (const auto& s : samples) {
      if (*s.answer == label.answer) {
        label.contributing_models.insert(model_id);
        break;
      }
    }
  }
  return label;
}

bool labels_equal(const PseudoLabel& a, const PseudoLabel& b) {
  return a.answer == b.answer && a.weighted_mass == b.weighted_mass && a.margin == b.margin &&
         a.contributing_models == b.contributing_models;
}

// 1. Both vote modes reproduce brute-force tallies exactly.
std::string check_vote_oracle() {
  auto g = stream(1001ULL, 1ULL);
  int voted = 0;
  int empty = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const VotePool pool = random_pool(g, "q");
    if (pool.valid_count() == 0) {
      ++empty;
      bool threw = false;
      try {
        simple_vote(pool);
      } catch (const EmptyPoolError&) {
        threw = true;
      }
      require(threw, "empty pool did not throw");
      continue;
    }
    ++voted;
    const auto scores = self_consistency(pool);
    std::map<std::string, double> weights;
    std::map<std::string, double> unit;
    for (const auto& [model_id, score] : scores) {
      weights[model_id] = score.sc;
      unit[model_id] = 1.0;
    }
    require(labels_equal(sc_weighted_vote(pool, scores), oracle_vote(pool, weights)),
            "weighted vote diverged from the oracle on pool " + std::to_string(rep));
    require(labels_equal(simple_vote(pool), oracle_vote(pool, unit)),
            "simple vote diverged from the oracle on pool " + std::to_string(rep));
  }
  return std::to_string(voted) + " pools matched exactly (" + std::to_string(empty) +
         " empty pools threw)";
}

// 2. Equal weights reduce to head counting; positive rescaling never moves
//    the label.
std::string check_weighting_reductions() {
  auto g = stream(1002ULL, 2ULL);
  int checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const VotePool pool = random_pool(g, "q");
    if (pool.valid_count() == 0) continue;
    ++checked;

    const double w = 0.1 + 1.9 * uniform01(g);
    auto scores = self_consistency(pool);
    auto equal_scores = scores;
    for (auto& [_, score] : equal_scores) score.sc = w;
    require(sc_weighted_vote(pool, equal_scores).answer == simple_vote(pool).answer,
            "equal weights disagreed with the simple vote on pool " + std::to_string(rep));

    // Powers of two rescale doubles without rounding, so even exact tally
    // ties must survive; arbitrary factors already perturb the scores on the
    // way into the call.
    const PseudoLabel base = sc_weighted_vote(pool, scores);
    int exponent = static_cast<int>(uniform01(g) * 6) - 3;
    if (exponent >= 0) ++exponent;
    const double c = std::ldexp(1.0, exponent);
    for (auto& [_, score] : scores) score.sc *= c;
    const PseudoLabel rescaled = sc_weighted_vote(pool, scores);
    require(rescaled.answer == base.answer,
            "rescaling by " + fmt(c) + " moved the label on pool " + std::to_string(rep));
    require(rescaled.weighted_mass == c * base.weighted_mass &&
                rescaled.margin == c * base.margin &&
                rescaled.contributing_models == base.contributing_models,
            "rescaling by " + fmt(c) + " bent the diagnostics on pool " + std::to_string(rep));
  }
  return std::to_string(checked) + " pools reduced and rescaled exactly";
}

// 3. Advantage normalization, clip branches, and the objective gradient.
std::string check_policy_math() {
  Eigen::VectorXd rewards(4);
  rewards << 1, 1, 0, 0;
  const Eigen::VectorXd normalized = normalize_advantages(rewards);
  for (int i = 0; i < 4; ++i) {
    const double expected = i < 2 ? 1.0 : -1.0;
    require(std::abs(normalized[i] - expected) < 1e-12, "z-score of [1,1,0,0] wrong");
  }
  require(normalize_advantages(Eigen::VectorXd::Ones(5)).isZero(),
          "constant rewards must normalize to zeros");

  const double eps = 0.2;
  const struct {
    double rho, a, expected;
  } branch_cases[] = {
      {0.5, 1.0, 0.5},  {0.5, -1.0, -0.8}, {1.0, 1.0, 1.0},
      {1.0, -1.0, -1.0}, {1.5, 1.0, 1.2},  {1.5, -1.0, -1.5},
  };
  for (const auto& c : branch_cases) {
    require(std::abs(clipped_advantage(c.rho, c.a, eps) - c.expected) < 1e-15,
            "clip branch (" + fmt(c.rho) + ", " + fmt(c.a) + ") wrong");
  }

  auto g = stream(1003ULL, 3ULL);
  ClipConfig config;
  const double step = 1e-6;
  double worst = 0.0;
  int instances = 0;
  while (instances < 100) {
    config.epsilon = 0.1 + 0.3 * uniform01(g);
    config.beta = uniform01(g) < 0.25 ? 0.0 : 0.02;
    const int vocab = 2 + static_cast<int>(uniform01(g) * 5);
    const int k = 1 + static_cast<int>(uniform01(g) * 8);

    Eigen::VectorXd logits(vocab);
    for (int j = 0; j < vocab; ++j) logits[j] = 2.0 * (uniform01(g) - 0.5);
    Eigen::VectorXd probs_old(vocab);
    Eigen::VectorXd probs_ref(vocab);
    for (int j = 0; j < vocab; ++j) probs_old[j] = 0.05 + uniform01(g);
    for (int j = 0; j < vocab; ++j) probs_ref[j] = 0.05 + uniform01(g);
    probs_old /= probs_old.sum();
    probs_ref /= probs_ref.sum();

    std::vector<std::optional<int>> answers;
    Eigen::VectorXd advantages(k);
    for (int i = 0; i < k; ++i) {
      advantages[i] = 3.0 * (uniform01(g) - 0.5);
      if (uniform01(g) < 0.1) {
        answers.emplace_back(std::nullopt);
      } else {
        answers.emplace_back(static_cast<int>(uniform01(g) * vocab));
      }
    }

    // Ratios on a clip boundary are only one-sided differentiable; skip.
    const Eigen::VectorXd probs = softmax(logits);
    bool near_kink = false;
    for (const auto& a : answers) {
      if (!a) continue;
      const double rho = probs[*a] / probs_old[*a];
      if (std::abs(rho - (1.0 - config.epsilon)) < 1e-4 ||
          std::abs(rho - (1.0 + config.epsilon)) < 1e-4) {
        near_kink = true;
      }
    }
    if (near_kink) continue;
    ++instances;

    const Eigen::VectorXd grad =
        objective_gradient(answers, advantages, logits, probs_old, probs_ref, config);
    for (int j = 0; j < vocab; ++j) {
      Eigen::VectorXd up = logits;
      Eigen::VectorXd down = logits;
      up[j] += step;
      down[j] -= step;
      const double fd = (objective_value(answers, advantages, up, probs_old, probs_ref, config) -
                         objective_value(answers, advantages, down, probs_old, probs_ref,
                                         config)) /
                        (2.0 * step);
      const double rel =
          std::abs(grad[j] - fd) / std::max({1.0, std::abs(fd), std::abs(grad[j])});
      worst = std::max(worst, rel);
      require(rel < 1e-5, "gradient check failed: relative error " + std::to_string(rel));
    }
  }
  return "branch table exact; 100 gradient checks, worst relative error " + fmt_sci(worst);
}

// 4. Averaging N biased generators shrinks the spread like 1/sqrt(N) and
//    stays centered on the truth.
std::string check_convergence_rate() {
  AggregationTrial base;
  base.k_samples = 16;
  base.bias_std = 1.0;
  base.noise_std = 0.1;
  base.trials = 10000;
  base.seed = 1004;
  base.ground_truth = 1.5;
  const auto result = convergence_sweep({1, 2, 4, 8, 16}, base);

  require(std::abs(result.slope + 0.5) <= 0.1,
          "log-log slope " + fmt(result.slope) + " outside -0.5 +/- 0.1");
  for (const auto& row : result.rows) {
    const double se = row.std_x / std::sqrt(static_cast<double>(base.trials));
    require(std::abs(row.mean_x - base.ground_truth) <= 3.0 * se,
            "mean at N=" + std::to_string(row.n_models) + " off truth by " +
                fmt(std::abs(row.mean_x - base.ground_truth)) + " (3se = " + fmt(3.0 * se) +
                ")");
  }
  return "slope " + fmt(result.slope) + ", means within 3 se of truth at every N";
}

// 5. Pooled votes recover the true index more often than a lone generator.
std::string check_recovery_growth() {
  const SweepConfig reference;  // defaults are the reference bias/noise setup
  AggregationTrial base;
  base.k_samples = reference.k_samples;
  base.bias_std = reference.bias_std;
  base.noise_std = reference.noise_std;
  base.trials = reference.trials;
  base.seed = reference.seed;

  const auto rates = mode_recovery_rate(base, {1, 8}, reference.vocab_size);
  const int hits = static_cast<int>(std::llround(rates[1] * base.trials));
  const double p = binomial_tail_pvalue(hits, base.trials, rates[0]);
  require(rates[1] > rates[0], "recovery did not grow: " + fmt(rates[0]) + " -> " + fmt(rates[1]));
  require(p < 0.01, "one-sided p = " + fmt_sci(p) + " not below 0.01");
  return "recovery " + fmt(rates[0]) + " (N=1) -> " + fmt(rates[1]) + " (N=8), p = " + fmt_sci(p);
}

// 6. Across a population with heterogeneous spreads, a model's
//    self-consistency tracks its accuracy.
std::string check_sc_accuracy_correlation() {
  const int n_models = 24;
  const int n_questions = 200;
  const int k = 16;

  BiasModelSpec spec;
  spec.n_models = n_models;
  spec.k_samples = k;
  spec.bias_std = 0.5;
  for (int m = 0; m < n_models; ++m) {
    spec.noise_std_per_model.push_back(0.7 + 1.8 * m / (n_models - 1.0));
  }

  const auto tasks = make_tasks(n_questions, 4, {"math"}, 1006, "c6-");
  const auto policies = init_policies(tasks, spec, {}, 1006);

  std::vector<double> mean_sc(n_models, 0.0);
  std::vector<double> mean_accuracy(n_models, 0.0);
  for (int m = 0; m < n_models; ++m) {
    for (const auto& task : tasks) {
      auto engine = stream(1006ULL, streams::kTrial, m, fnv1a64(task.question_id));
      const auto samples = sample_answers(policies[m], task, k, 0.0, engine);
      mean_sc[m] += self_consistency(std::span<const AnswerSample>(samples)).sc;
      int correct = 0;
      for (const auto& s : samples) correct += *s.answer == task.ground_truth() ? 1 : 0;
      mean_accuracy[m] += static_cast<double>(correct) / k;
    }
    mean_sc[m] /= n_questions;
    mean_accuracy[m] /= n_questions;
  }

  double sc_bar = 0.0;
  double acc_bar = 0.0;
  for (int m = 0; m < n_models; ++m) {
    sc_bar += mean_sc[m];
    acc_bar += mean_accuracy[m];
  }
  sc_bar /= n_models;
  acc_bar /= n_models;
  double cov = 0.0;
  double var_sc = 0.0;
  double var_acc = 0.0;
  for (int m = 0; m < n_models; ++m) {
    cov += (mean_sc[m] - sc_bar) * (mean_accuracy[m] - acc_bar);
    var_sc += (mean_sc[m] - sc_bar) * (mean_sc[m] - sc_bar);
    var_acc += (mean_accuracy[m] - acc_bar) * (mean_accuracy[m] - acc_bar);
  }
  const double pearson = cov / std::sqrt(var_sc * var_acc);
  require(pearson > 0.6, "Pearson " + fmt(pearson) + " not above 0.6");
  return "Pearson(sc, accuracy) = " + fmt(pearson) + " over " + std::to_string(n_models) +
         " models x " + std::to_string(n_questions) + " questions";
}

// 7. The reference coevolution run lifts the group vote and beats
//    per-model self-training under the same sample budget.
std::string check_collective_improvement() {
  int improved = 0;
  double mean_weighted = 0.0;
  double mean_self = 0.0;
  double mean_initial = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig config = make_reference_config();
    config.seed = seed;

    const auto weighted = run_rlccf(config);
    const double initial = weighted.initial_train.group_vote_accuracy;
    const double final_group = weighted.final_train().group_vote_accuracy;
    if (final_group > initial) ++improved;
    mean_weighted += final_group / 5.0;
    mean_initial += initial / 5.0;

    mean_self += run_ttrl_single(config).final_train().group_vote_accuracy / 5.0;
  }
  require(improved >= 4, "only " + std::to_string(improved) + "/5 seeds improved the group vote");
  require(mean_weighted >= mean_self, "weighted mean " + fmt(mean_weighted) +
                                          " below self-training mean " + fmt(mean_self));
  return std::to_string(improved) + "/5 seeds improved; group " + fmt(mean_initial) + " -> " +
         fmt(mean_weighted) + " vs self-training " + fmt(mean_self);
}

// 8. Consistency weighting labels the asymmetric benchmark at least as well
//    as plain head counting.
std::string check_weighting_direction() {
  double mean_weighted = 0.0;
  double mean_simple = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig config = make_asymmetric_sc_config();
    config.seed = seed;
    mean_weighted += run_rlccf(config).steps.back().metrics.label_accuracy / 5.0;
    mean_simple += run_ablation_simple_vote(config).steps.back().metrics.label_accuracy / 5.0;
  }
  require(mean_weighted >= mean_simple,
          "weighted " + fmt(mean_weighted) + " below simple " + fmt(mean_simple));
  return "final label accuracy " + fmt(mean_weighted) + " (weighted) vs " + fmt(mean_simple) +
         " (simple) over 5 paired seeds";
}

// 9. Two specialists vote better together than either alone.
std::string check_complementarity() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig config = make_complementarity_config();
    config.seed = seed;
    const auto trace = run_rlccf(config);
    const EvalReport& final_eval = trace.final_train();
    double best_model = 0.0;
    for (const auto& [_, accuracy] : final_eval.per_model_accuracy) {
      best_model = std::max(best_model, accuracy);
    }
    if (final_eval.group_vote_accuracy > best_model) ++wins;
    if (seed == 1) {
      detail = "seed 1: group " + fmt(final_eval.group_vote_accuracy) + " vs best model " +
               fmt(best_model);
    }
  }
  require(wins >= 4, "group beat both specialists on only " + std::to_string(wins) + "/5 seeds");
  return std::to_string(wins) + "/5 seeds, " + detail;
}

int run_cli_command(const std::string& args) {
  const std::string command = std::string(COEVO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

// 10. The CLI writes byte-identical artifacts to the in-process pipeline and
//     repeats itself exactly under a fixed seed.
std::string check_cli_round_trip() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "coevo_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto g = stream(1010ULL, 10ULL);
  std::vector<VotePool> pools;
  std::map<std::string, std::string> truth;
  for (int i = 0; i < 40; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "q%03d", i);
    pools.push_back(random_pool(g, id));
    truth[id] = std::string(1, static_cast<char>('a' + static_cast<int>(uniform01(g) * 6)));
  }
  const fs::path pool_path = dir / "pools.jsonl";
  const fs::path truth_path = dir / "truth.jsonl";
  write_file_atomic(pool_path, pools_to_jsonl(pools));
  write_file_atomic(truth_path, truth_to_jsonl(truth));

  // Parsed pools come back keyed by question; mirror that order.
  const std::vector<VotePool> parsed = pools_from_jsonl(pools_to_jsonl(pools));

  std::vector<LabelEntry> entries;
  for (const VotePool& pool : parsed) {
    if (pool.valid_count() == 0) {
      entries.push_back(make_skipped_entry(pool.question_id));
      continue;
    }
    const auto scores = self_consistency(pool);
    entries.push_back(make_label_entry(sc_weighted_vote(pool, scores), scores));
  }
  std::vector<RewardGroup> groups;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (entries[i].skipped) {
      for (const auto& [model_id, _] : parsed[i].per_model_samples) {
        groups.push_back({parsed[i].question_id, model_id,
                          std::vector<int>(static_cast<std::size_t>(parsed[i].k_requested), 0)});
      }
      continue;
    }
    PseudoLabel label;
    label.question_id = parsed[i].question_id;
    label.answer = entries[i].answer;
    for (RewardGroup& group : binary_rewards(parsed[i], label)) groups.push_back(std::move(group));
  }

  require(run_cli_command("vote " + pool_path.string() + " -o " + (dir / "labels.jsonl").string()) ==
              0,
          "vote command failed");
  require(read_file(dir / "labels.jsonl") == labels_to_jsonl(entries),
          "vote output differs from the in-process labels");

  require(run_cli_command("reward " + pool_path.string() + " --labels " +
                          (dir / "labels.jsonl").string() + " --ground-truth " +
                          truth_path.string() + " -o " + (dir / "rewards.jsonl").string()) == 0,
          "reward command failed");
  require(read_file(dir / "rewards.jsonl") == rewards_to_jsonl(groups),
          "reward output differs from the in-process rewards");

  const std::string config_text =
      "coevo.config.v1\n"
      "modes = rlccf, ttrl_single\n"
      "seed = 7\n"
      "steps = 20\n"
      "batch_size = 8\n"
      "n_models = 2\n"
      "samples_per_model = 8\n"
      "train_tasks = 20\n"
      "eval_tasks = 10\n"
      "vocab_size = 4\n"
      "eval_every = 5\n"
      "eval_samples = 16\n";
  write_file_atomic(dir / "sim.cfg", config_text);
  require(run_cli_command("simulate " + (dir / "sim.cfg").string() + " -o " +
                          (dir / "run1").string()) == 0,
          "first simulate run failed");
  require(run_cli_command("simulate " + (dir / "sim.cfg").string() + " -o " +
                          (dir / "run2").string()) == 0,
          "second simulate run failed");

  int compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "run1")) {
    const fs::path twin = dir / "run2" / entry.path().filename();
    require(fs::exists(twin), "missing twin file " + twin.string());
    require(read_file(entry.path()) == read_file(twin),
            "reruns diverged in " + entry.path().filename().string());
    ++compared;
  }
  require(compared >= 5, "expected traces, checkpoints, and a summary to compare");

  require(run_cli_command("vote " + (dir / "no_such_file.jsonl").string() + " -o " +
                          (dir / "x.jsonl").string()) == 2,
          "bad input should exit with code 2");

  fs::remove_all(dir);
  return "labels, rewards, and " + std::to_string(compared) +
         " rerun files byte-identical; bad input exits 2";
}

}  // namespace

int main() {
  const struct {
    const char* name;
    std::function<std::string()> run;
  } criteria[] = {
      {"vote oracle equivalence", check_vote_oracle},
      {"weighting reductions", check_weighting_reductions},
      {"policy optimization math", check_policy_math},
      {"ensemble convergence rate", check_convergence_rate},
      {"vote recovery growth", check_recovery_growth},
      {"consistency-accuracy correlation", check_sc_accuracy_correlation},
      {"collective improvement", check_collective_improvement},
      {"weighting ablation direction", check_weighting_direction},
      {"specialist complementarity", check_complementarity},
      {"CLI round trip and determinism", check_cli_round_trip},
  };

  int failures = 0;
  int index = 0;
  for (const auto& criterion : criteria) {
    ++index;
    try {
      const std::string detail = criterion.run();
      std::printf("[PASS] %2d %s: %s\n", index, criterion.name, detail.c_str());
    } catch (const CheckFailure& failure) {
      ++failures;
      std::printf("[FAIL] %2d %s: %s\n", index, criterion.name, failure.detail.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2d %s: unexpected error: %s\n", index, criterion.name, e.what());
    }
    std::fflush(stdout);
  }

  if (failures > 0) {
    std::printf("%d of 10 criteria failed\n", failures);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
