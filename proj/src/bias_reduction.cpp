#include "coevo/bias_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coevo/errors.hpp"
#include "coevo/rng.hpp"

namespace coevo {

namespace {

void check_trial(const AggregationTrial& trial) {
  if (trial.trials < 100) {
    throw InputError("aggregation needs at least 100 trials, got " +
                     std::to_string(trial.trials));
  }
  if (trial.n_models < 1 || trial.k_samples < 1) {
    throw InputError("aggregation needs n_models >= 1 and k_samples >= 1");
  }
  if (trial.bias_std < 0.0 || trial.noise_std < 0.0) {
    throw InputError("aggregation needs non-negative bias_std and noise_std");
  }
}

}  // namespace

AggregationSummary aggregate_mean_error(const AggregationTrial& trial) {
  check_trial(trial);
  std::vector<double> grand_means;
  grand_means.reserve(static_cast<std::size_t>(trial.trials));
  for (int t = 0; t < trial.trials; ++t) {
    auto engine = stream(trial.seed, streams::kTrial, trial.n_models, t);
    double sum = 0.0;
    for (int m = 0; m < trial.n_models; ++m) {
      const double bias = trial.bias_std * normal(engine);
      for (int k = 0; k < trial.k_samples; ++k) {
        sum += trial.ground_truth + bias + trial.noise_std * normal(engine);
      }
    }
    grand_means.push_back(sum / (trial.n_models * trial.k_samples));
  }

  AggregationSummary summary;
  for (double x : grand_means) {
    summary.mean_x += x;
    summary.mean_abs_error += std::abs(x - trial.ground_truth);
  }
  summary.mean_x /= trial.trials;
  summary.mean_abs_error /= trial.trials;
  double var = 0.0;
  for (double x : grand_means) {
    var += (x - summary.mean_x) * (x - summary.mean_x);
  }
  summary.std_x = std::sqrt(var / trial.trials);
  return summary;
}

ConvergenceResult convergence_sweep(const std::vector<int>& n_values,
                                    const AggregationTrial& base) {
  if (n_values.size() < 3) {
    throw InsufficientPointsError("convergence sweep needs at least 3 ensemble sizes, got " +
                                  std::to_string(n_values.size()));
  }
  for (std::size_t i = 1; i < n_values.size(); ++i) {
    if (n_values[i] <= n_values[i - 1]) {
      throw InputError("ensemble sizes must be strictly increasing");
    }
  }

  ConvergenceResult result;
  result.rows.reserve(n_values.size());
  for (int n : n_values) {
    AggregationTrial trial = base;
    trial.n_models = n;
    const AggregationSummary summary = aggregate_mean_error(trial);
    result.rows.push_back({n, summary.mean_x, summary.mean_abs_error, summary.std_x});
  }

  // Least-squares fit of log(std_x) on log(n).
  const auto points = static_cast<double>(result.rows.size());
  double mean_lx = 0.0;
  double mean_ly = 0.0;
  for (const SweepRow& row : result.rows) {
    mean_lx += std::log(static_cast<double>(row.n_models));
    mean_ly += std::log(row.std_x);
  }
  mean_lx /= points;
  mean_ly /= points;
  double cov = 0.0;
  double var = 0.0;
  for (const SweepRow& row : result.rows) {
    const double dx = std::log(static_cast<double>(row.n_models)) - mean_lx;
    const double dy = std::log(row.std_x) - mean_ly;
    cov += dx * dy;
    var += dx * dx;
  }
  result.slope = cov / var;
  return result;
}

std::vector<double> mode_recovery_rate(const AggregationTrial& base,
                                       const std::vector<int>& n_values, int vocab_size,
                                       BiasAssignment assignment) {
  check_trial(base);
  if (vocab_size < 2) {
    throw InputError("mode recovery needs a vocabulary of at least 2 answers");
  }
  if (n_values.empty()) {
    throw InputError("mode recovery needs at least one ensemble size");
  }

  const int truth = vocab_size / 2;
  const double sigma = std::max(base.noise_std, 1e-9);

  std::vector<double> rates;
  rates.reserve(n_values.size());
  for (int n : n_values) {
    if (n < 1) {
      throw InputError("ensemble sizes must be positive");
    }
    int hits = 0;
    for (int t = 0; t < base.trials; ++t) {
      auto engine = stream(base.seed, streams::kTrial, n, t);
      std::vector<int> tally(static_cast<std::size_t>(vocab_size), 0);
      for (int m = 0; m < n; ++m) {
        double offset = 0.0;
        switch (assignment) {
          case BiasAssignment::kGaussian:
            offset = base.bias_std * normal(engine);
            break;
          case BiasAssignment::kAlternating:
            offset = (m % 2 == 0) ? base.bias_std : -base.bias_std;
            break;
        }
        const long center = truth + std::llround(offset);
        Eigen::VectorXd logits(vocab_size);
        for (int j = 0; j < vocab_size; ++j) {
          const double d = j - static_cast<double>(center);
          logits[j] = -d * d / (2.0 * sigma * sigma);
        }
        logits.array() -= logits.maxCoeff();
        Eigen::VectorXd probs = logits.array().exp();
        probs /= probs.sum();
        for (int k = 0; k < base.k_samples; ++k) {
          ++tally[static_cast<std::size_t>(categorical(probs, engine))];
        }
      }
      const int winner = static_cast<int>(
          std::max_element(tally.begin(), tally.end()) - tally.begin());
      if (winner == truth) {
        ++hits;
      }
    }
    rates.push_back(static_cast<double>(hits) / base.trials);
  }
  return rates;
}

double binomial_tail_pvalue(int k, int n, double p0) {
  if (n < 0) {
    throw InputError("binomial tail needs n >= 0");
  }
  if (k <= 0) {
    return 1.0;
  }
  if (k > n) {
    return 0.0;
  }
  if (p0 <= 0.0) {
    return 0.0;
  }
  if (p0 >= 1.0) {
    return 1.0;
  }

  // Sum C(n, i) p^i (1-p)^(n-i) for i in [k, n], accumulated in log space
  // against the largest term to avoid underflow.
  const double log_p = std::log(p0);
  const double log_q = std::log1p(-p0);
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(n - k + 1));
  double max_term = -std::numeric_limits<double>::infinity();
  for (int i = k; i <= n; ++i) {
    const double log_c = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    const double term = log_c + i * log_p + (n - i) * log_q;
    log_terms.push_back(term);
    max_term = std::max(max_term, term);
  }
  double sum = 0.0;
  for (double term : log_terms) {
    sum += std::exp(term - max_term);
  }
  return std::min(1.0, std::exp(max_term) * sum);
}

}  // namespace coevo
