#pragma once

#include <iosfwd>
#include <string>

namespace coevo {

enum class Weighting { kSc, kSimple };

// Subcommand bodies. Each throws on failure (InputError and subclasses for
// bad input, anything else is an internal error); run_cli maps exceptions to
// the documented exit codes: 0 success, 2 input/config error, 1 internal.

// Reads a coevo.pool.v1 file, votes per question, writes coevo.labels.v1.
// Questions whose pool has no valid sample become skipped entries.
void cmd_vote(const std::string& pool_path, Weighting weighting, const std::string& output_path,
              std::ostream& out);

// Reads a pool and its labels, writes coevo.rewards.v1 plus a one-line
// metrics summary on `out` (optionally also to summary_path). Skipped-label
// questions produce all-zero reward groups; a pooled question without any
// label entry is an error. A ground-truth file adds label and reward
// accuracy to the summary.
void cmd_reward(const std::string& pool_path, const std::string& labels_path,
                const std::string& truth_path, const std::string& rewards_path,
                const std::string& summary_path, std::ostream& out);

// Runs every configured (mode, seed) pair; writes one trace and one final
// checkpoint per run plus summary.json into output_dir.
void cmd_simulate(const std::string& config_path, const std::string& output_dir,
                  std::ostream& out);

// Runs the ensemble-averaging sweep and writes the tab-separated table
// (per-N statistics, vote-recovery rate, fitted log-log slope).
void cmd_bias_sweep(const std::string& config_path, const std::string& output_path,
                    std::ostream& out);

// Full argv-level entry point used by main().
int run_cli(int argc, char** argv);

}  // namespace coevo
