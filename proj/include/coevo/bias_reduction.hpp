#pragma once

#include <cstdint>
#include <vector>

// Monte Carlo study of ensemble averaging: outputs of N generators, each
// biased by a zero-mean model-specific offset and jittered by per-sample
// noise, concentrate on the ground truth as N grows. Companion experiment
// checks the discrete analogue, where the pooled majority vote of the
// quantized generators recovers the true answer index.

namespace coevo {

struct AggregationTrial {
  int n_models = 1;
  int k_samples = 1;
  double bias_std = 1.0;   // std of the per-model offset draw
  double noise_std = 1.0;  // per-sample sigma
  int trials = 1000;       // must be >= 100
  std::uint64_t seed = 1;
  double ground_truth = 0.0;  // scalar embedding of the true answer
};

struct AggregationSummary {
  double mean_x = 0.0;          // mean of the grand mean X over trials
  double mean_abs_error = 0.0;  // mean |X - GT|
  double std_x = 0.0;           // std of X over trials
};

// Per trial: draw a fresh offset per model, then k noisy samples per model;
// X is the grand mean over all N*K samples. Statistics are over `trials`
// repetitions.
AggregationSummary aggregate_mean_error(const AggregationTrial& trial);

struct SweepRow {
  int n_models = 0;
  double mean_x = 0.0;
  double mean_abs_error = 0.0;
  double std_x = 0.0;
};

struct ConvergenceResult {
  std::vector<SweepRow> rows;
  double slope = 0.0;  // least-squares slope of log(std_x) vs log(N)
};

// Runs aggregate_mean_error across n_values (strictly increasing, >= 3
// points; fewer throws InsufficientPointsError) and fits the log-log decay
// rate of the aggregate's spread.
ConvergenceResult convergence_sweep(const std::vector<int>& n_values,
                                    const AggregationTrial& base);

enum class BiasAssignment {
  kGaussian,     // fresh N(0, bias_std) offset per model per trial
  kAlternating,  // deterministic +bias_std / -bias_std, half the models each
};

// Discrete analogue on an integer answer line of vocab_size answers with the
// truth at the center index: per trial, each model samples k answers from
// softmax(-(j - center)^2 / (2 sigma^2)) with its quantized offset, the pool
// votes by simple majority (ties to the smallest index), and the rate counts
// trials whose winner is the true index. One rate per entry of n_values.
std::vector<double> mode_recovery_rate(const AggregationTrial& base,
                                       const std::vector<int>& n_values, int vocab_size,
                                       BiasAssignment assignment = BiasAssignment::kGaussian);

// P(Binomial(n, p0) >= k), exact tail in log space.
double binomial_tail_pvalue(int k, int n, double p0);

}  // namespace coevo
