#include "coevo/commands.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coevo/bias_reduction.hpp"
#include "coevo/config.hpp"
#include "coevo/errors.hpp"
#include "coevo/io.hpp"
#include "coevo/records.hpp"
#include "coevo/rewards.hpp"
#include "coevo/simulation.hpp"
#include "coevo/voting.hpp"

namespace coevo {

namespace {

using nlohmann::json;

json eval_pair_json(const EvalReport& initial, const EvalReport& final_report) {
  json value;
  value["initial_group"] = initial.group_vote_accuracy;
  value["final_group"] = final_report.group_vote_accuracy;
  return value;
}

}  // namespace

void cmd_vote(const std::string& pool_path, Weighting weighting, const std::string& output_path,
              std::ostream& out) {
  const std::vector<VotePool> pools = pools_from_jsonl(read_file(pool_path));

  std::vector<LabelEntry> entries;
  entries.reserve(pools.size());
  int skipped = 0;
  for (const VotePool& pool : pools) {
    if (pool.valid_count() == 0) {
      entries.push_back(make_skipped_entry(pool.question_id));
      ++skipped;
      continue;
    }
    const auto scores = self_consistency(pool);
    const PseudoLabel label =
        weighting == Weighting::kSc ? sc_weighted_vote(pool, scores) : simple_vote(pool);
    entries.push_back(make_label_entry(label, scores));
  }

  write_file_atomic(output_path, labels_to_jsonl(entries));
  out << "labeled " << (entries.size() - skipped) << " questions (" << skipped
      << " skipped) -> " << output_path << "\n";
}

void cmd_reward(const std::string& pool_path, const std::string& labels_path,
                const std::string& truth_path, const std::string& rewards_path,
                const std::string& summary_path, std::ostream& out) {
  const std::vector<VotePool> pools = pools_from_jsonl(read_file(pool_path));
  const std::vector<LabelEntry> entries = labels_from_jsonl(read_file(labels_path));

  std::map<std::string, const LabelEntry*> label_by_question;
  for (const LabelEntry& entry : entries) label_by_question[entry.question_id] = &entry;

  std::vector<RewardGroup> groups;
  std::vector<PseudoLabel> labels;
  double cc_sum = 0.0;
  int cc_count = 0;
  std::map<std::string, double> sc_sum;
  std::map<std::string, int> sc_count;
  int skipped = 0;

  for (const VotePool& pool : pools) {
    const auto it = label_by_question.find(pool.question_id);
    if (it == label_by_question.end()) {
      throw InputError("no label entry for pooled question '" + pool.question_id + "'");
    }
    const LabelEntry& entry = *it->second;

    if (entry.skipped) {
      ++skipped;
      for (const auto& [model_id, _] : pool.per_model_samples) {
        groups.push_back({pool.question_id, model_id,
                          std::vector<int>(static_cast<std::size_t>(pool.k_requested), 0)});
      }
    } else {
      PseudoLabel label;
      label.question_id = pool.question_id;
      label.answer = entry.answer;
      labels.push_back(label);
      for (RewardGroup& group : binary_rewards(pool, label)) {
        groups.push_back(std::move(group));
      }
    }

    if (pool.valid_count() > 0) {
      cc_sum += collective_consistency(pool);
      ++cc_count;
      for (const auto& [model, score] : self_consistency(pool)) {
        if (score.valid_count > 0) {
          sc_sum[model] += score.sc;
          ++sc_count[model];
        }
      }
    }
  }

  write_file_atomic(rewards_path, rewards_to_jsonl(groups));

  json summary;
  summary["schema"] = "coevo.metrics.v1";
  summary["questions"] = pools.size();
  summary["skipped"] = skipped;
  summary["collective_consistency"] = cc_count > 0 ? cc_sum / cc_count : 0.0;
  summary["sc"] = json::object();
  for (const auto& [model, total] : sc_sum) summary["sc"][model] = total / sc_count.at(model);
  if (!truth_path.empty()) {
    const auto truth = truth_from_jsonl(read_file(truth_path));
    summary["label_accuracy"] = labels.empty() ? 0.0 : label_accuracy(labels, truth);
    summary["reward_accuracy"] = groups.empty() ? 0.0 : reward_accuracy(groups, pools, truth);
  }

  const std::string summary_line = summary.dump();
  out << summary_line << "\n";
  if (!summary_path.empty()) {
    write_file_atomic(summary_path, summary_line + "\n");
  }
}

void cmd_simulate(const std::string& config_path, const std::string& output_dir,
                  std::ostream& out) {
  const ExperimentConfig config = load_config(config_path);
  std::filesystem::create_directories(output_dir);
  const std::filesystem::path dir(output_dir);

  json runs = json::array();
  std::map<std::string, std::pair<double, int>> final_group_by_mode;

  for (const Mode mode : config.resolved_modes()) {
    for (const std::uint64_t seed : config.resolved_seeds()) {
      ExperimentConfig run_config = config;
      run_config.mode = mode;
      run_config.seed = seed;
      const ExperimentResult result = run_experiment_full(run_config);

      const std::string stem = mode_name(mode) + "_seed" + std::to_string(seed);
      write_file_atomic((dir / ("trace_" + stem + ".jsonl")).string(),
                        trace_to_jsonl(result.trace, run_config));
      save_checkpoint(result.final_policies, dir / ("checkpoint_" + stem + ".txt"));

      json run;
      run["mode"] = mode_name(mode);
      run["seed"] = seed;
      run["train"] = eval_pair_json(result.trace.initial_train, result.trace.final_train());
      if (result.trace.initial_holdout) {
        run["holdout"] =
            eval_pair_json(*result.trace.initial_holdout, result.trace.final_holdout());
      }
      run["final_model_accuracy"] = json::object();
      for (const auto& [model, accuracy] : result.trace.final_train().per_model_accuracy) {
        run["final_model_accuracy"][model] = accuracy;
      }
      runs.push_back(run);

      auto& [sum, count] = final_group_by_mode[mode_name(mode)];
      sum += result.trace.final_train().group_vote_accuracy;
      ++count;

      out << "mode=" << mode_name(mode) << " seed=" << seed << " group "
          << result.trace.initial_train.group_vote_accuracy << " -> "
          << result.trace.final_train().group_vote_accuracy << "\n";
    }
  }

  json summary;
  summary["schema"] = "coevo.summary.v1";
  summary["runs"] = runs;
  summary["mean_final_group_by_mode"] = json::object();
  for (const auto& [mode, sum_count] : final_group_by_mode) {
    summary["mean_final_group_by_mode"][mode] = sum_count.first / sum_count.second;
  }

  const std::filesystem::path summary_path = dir / "summary.json";
  write_file_atomic(summary_path.string(), summary.dump(2) + "\n");
  out << "summary -> " << summary_path.string() << "\n";
}

void cmd_bias_sweep(const std::string& config_path, const std::string& output_path,
                    std::ostream& out) {
  const SweepConfig config = load_sweep_config(config_path);

  AggregationTrial base;
  base.k_samples = config.k_samples;
  base.bias_std = config.bias_std;
  base.noise_std = config.noise_std;
  base.trials = config.trials;
  base.seed = config.seed;

  const ConvergenceResult sweep = convergence_sweep(config.n_values, base);
  const std::vector<double> recovery =
      mode_recovery_rate(base, config.n_values, config.vocab_size);

  std::ostringstream table;
  table << std::setprecision(12);
  table << "# coevo.sweep.v1\n";
  table << "n\tmean_x\tmean_abs_error\tstd_x\trecovery_rate\n";
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const SweepRow& row = sweep.rows[i];
    table << row.n_models << "\t" << row.mean_x << "\t" << row.mean_abs_error << "\t"
          << row.std_x << "\t" << recovery[i] << "\n";
  }
  table << "# slope\t" << sweep.slope << "\n";

  write_file_atomic(output_path, table.str());
  out << "slope " << std::setprecision(12) << sweep.slope << "\n";
  out << "table -> " << output_path << "\n";
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Collective-vote pseudo-label rewards and coevolution simulator"};
  app.require_subcommand(1);

  std::string pool_path;
  std::string labels_path;
  std::string truth_path;
  std::string output_path;
  std::string summary_path;
  std::string config_path;
  std::string output_dir;
  std::string sweep_output = "bias_sweep.tsv";
  std::string weighting = "sc";

  CLI::App* vote = app.add_subcommand("vote", "Vote pseudo-labels from a sample pool");
  vote->add_option("pool", pool_path, "coevo.pool.v1 input file")->required();
  vote->add_option("-o,--output", output_path, "labels output file (coevo.labels.v1)")
      ->required();
  vote->add_option("--weighting", weighting, "sc (self-consistency weighted) or simple")
      ->check(CLI::IsMember({"sc", "simple"}));

  CLI::App* reward = app.add_subcommand("reward", "Score a pool against pseudo-labels");
  reward->add_option("pool", pool_path, "coevo.pool.v1 input file")->required();
  reward->add_option("--labels", labels_path, "coevo.labels.v1 file")->required();
  reward->add_option("--ground-truth", truth_path,
                     "coevo.truth.v1 file; adds label/reward accuracy to the summary");
  reward->add_option("-o,--output", output_path, "rewards output file (coevo.rewards.v1)")
      ->required();
  reward->add_option("--summary", summary_path, "also write the summary line to this file");

  CLI::App* simulate = app.add_subcommand("simulate", "Run configured training experiments");
  simulate->add_option("config", config_path, "coevo.config.v1 file")->required();
  simulate->add_option("-o,--output-dir", output_dir, "directory for traces and checkpoints")
      ->required();

  CLI::App* sweep = app.add_subcommand("bias-sweep", "Ensemble-averaging convergence table");
  sweep->add_option("config", config_path, "coevo.sweep.v1 file")->required();
  sweep->add_option("-o,--output", sweep_output, "output table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (vote->parsed()) {
      cmd_vote(pool_path, weighting == "sc" ? Weighting::kSc : Weighting::kSimple, output_path,
               std::cout);
    } else if (reward->parsed()) {
      cmd_reward(pool_path, labels_path, truth_path, output_path, summary_path, std::cout);
    } else if (simulate->parsed()) {
      cmd_simulate(config_path, output_dir, std::cout);
    } else if (sweep->parsed()) {
      cmd_bias_sweep(config_path, sweep_output, std::cout);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace coevo
