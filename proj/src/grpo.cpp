#include "coevo/grpo.hpp"

namespace coevo {

namespace {

void check_shapes(const std::vector<std::optional<int>>& sample_answers,
                  const Eigen::VectorXd& advantages, const Eigen::VectorXd& logits_new,
                  const Eigen::VectorXd& probs_old, const Eigen::VectorXd& probs_ref) {
  if (static_cast<Eigen::Index>(sample_answers.size()) != advantages.size()) {
    throw ShapeMismatchError("objective: one advantage required per sample");
  }
  if (logits_new.size() != probs_old.size() || logits_new.size() != probs_ref.size()) {
    throw ShapeMismatchError("objective: policy vectors must share the vocabulary");
  }
  const int vocab = static_cast<int>(logits_new.size());
  for (const auto& a : sample_answers) {
    if (a && (*a < 0 || *a >= vocab)) {
      throw ShapeMismatchError("objective: sample answer index out of vocabulary range");
    }
  }
}

// Derivative of min(rho*a, clip(rho)*a) with respect to rho. Ties resolve to
// the clipped branch, whose own kinks resolve to the flat (clipped) side.
double surrogate_slope(double rho, double a, double epsilon) {
  const double lo = 1.0 - epsilon;
  const double hi = 1.0 + epsilon;
  const double unclipped = rho * a;
  const double clipped = std::clamp(rho, lo, hi) * a;
  if (unclipped < clipped) return a;
  return (rho > lo && rho < hi) ? a : 0.0;
}

}  // namespace

double objective_value(const std::vector<std::optional<int>>& sample_answers,
                       const Eigen::VectorXd& advantages, const Eigen::VectorXd& logits_new,
                       const Eigen::VectorXd& probs_old, const Eigen::VectorXd& probs_ref,
                       const ClipConfig& config) {
  check_shapes(sample_answers, advantages, logits_new, probs_old, probs_ref);
  const Eigen::VectorXd probs = softmax(logits_new);
  const std::size_t k = sample_answers.size();

  double surrogate = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!sample_answers[i]) continue;
    const int a = *sample_answers[i];
    const double rho = importance_ratio(probs[a], probs_old[a]);
    surrogate += clipped_advantage(rho, advantages[static_cast<Eigen::Index>(i)], config.epsilon);
  }
  if (k > 0) surrogate /= static_cast<double>(k);
  return surrogate - config.beta * kl_divergence(probs, probs_ref);
}

Eigen::VectorXd objective_gradient(const std::vector<std::optional<int>>& sample_answers,
                                   const Eigen::VectorXd& advantages,
                                   const Eigen::VectorXd& logits_new,
                                   const Eigen::VectorXd& probs_old,
                                   const Eigen::VectorXd& probs_ref, const ClipConfig& config) {
  check_shapes(sample_answers, advantages, logits_new, probs_old, probs_ref);
  const Eigen::VectorXd probs = softmax(logits_new);
  const std::size_t k = sample_answers.size();

  // Surrogate term. d rho_k / d z_j = rho_k * (delta_{j,a_k} - p_j), so each
  // sample adds w_k to its own coordinate and -w_k * p to all of them.
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(logits_new.size());
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!sample_answers[i]) continue;
    const int a = *sample_answers[i];
    const double rho = importance_ratio(probs[a], probs_old[a]);
    const double w =
        surrogate_slope(rho, advantages[static_cast<Eigen::Index>(i)], config.epsilon) * rho;
    grad[a] += w;
    weight_sum += w;
  }
  if (k > 0) {
    grad /= static_cast<double>(k);
    grad.noalias() -= (weight_sum / static_cast<double>(k)) * probs;
  }

  // KL term: d KL / d z_j = p_j * (log(p_j / q_j) - KL).
  if (config.beta != 0.0) {
    const double kl = kl_divergence(probs, probs_ref);
    const Eigen::ArrayXd log_ratio = (probs.array() / probs_ref.array()).log();
    grad.array() -= config.beta * probs.array() * (log_ratio - kl);
  }
  return grad;
}

}  // namespace coevo
