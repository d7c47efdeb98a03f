#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "coevo/errors.hpp"

// Group-relative clipped policy optimization for categorical policies:
// z-scored group advantages, clipped importance ratios, a KL penalty
// against a frozen reference, and the exact objective gradient in the
// logit parameterization.

namespace coevo {

struct ClipConfig {
  double epsilon = 0.2;       // clip range, must lie in (0, 1)
  double beta = 0.01;         // KL penalty coefficient, >= 0
  int inner_epochs = 1;       // gradient steps per snapshot
  double learning_rate = 0.05;

  bool operator==(const ClipConfig&) const = default;
};

// Group-normalized advantages for one model on one question.
struct AdvantageVector {
  std::string question_id;
  std::string model_id;
  Eigen::VectorXd advantages;
};

template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> shifted =
      logits.derived().array() - logits.derived().maxCoeff();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> e = shifted.exp();
  return (e / e.sum()).matrix();
}

// Z-score with the population standard deviation; an all-equal group carries
// no learning signal and maps to all zeros.
template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> normalize_advantages(
    const Eigen::MatrixBase<Derived>& rewards) {
  using Scalar = typename Derived::Scalar;
  const auto& r = rewards.derived();
  const Scalar mean = r.mean();
  const Scalar var = (r.array() - mean).square().mean();
  if (var <= Scalar(0)) return Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(r.size());
  return ((r.array() - mean) / std::sqrt(var)).matrix();
}

inline double importance_ratio(double p_new, double p_old) {
  if (p_old <= 0.0) {
    throw ZeroOldProbabilityError("importance_ratio: sampled answer has zero snapshot probability");
  }
  return p_new / p_old;
}

// min(rho * a, clip(rho, 1-eps, 1+eps) * a)
template <typename Scalar>
Scalar clipped_advantage(Scalar rho, Scalar a, Scalar epsilon) {
  const Scalar clipped = std::clamp(rho, Scalar(1) - epsilon, Scalar(1) + epsilon);
  return std::min(rho * a, clipped * a);
}

// Exact KL(p || q) over a finite vocabulary, with 0 * log(0/q) = 0. Both
// inputs must sum to 1 within 1e-9; q must have support wherever p does.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != q.size()) throw ShapeMismatchError("kl_divergence: size mismatch");
  if (std::abs(p.derived().sum() - Scalar(1)) > Scalar(1e-9) ||
      std::abs(q.derived().sum() - Scalar(1)) > Scalar(1e-9)) {
    throw std::invalid_argument("kl_divergence: inputs must sum to 1");
  }
  Scalar kl(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p.derived()(i);
    if (pi <= Scalar(0)) continue;
    const Scalar qi = q.derived()(i);
    if (qi <= Scalar(0)) throw SupportMismatchError("kl_divergence: p > 0 where q = 0");
    kl += pi * std::log(pi / qi);
  }
  return kl;
}

// Per-question objective for one model:
//   (1/K) sum_k min(rho_k A_k, clip(rho_k) A_k)  -  beta * KL(softmax(logits) || probs_ref)
// sample_answers holds one vocabulary index per drawn sample; nullopt marks
// an invalid sample, which keeps its slot in the 1/K average but has no
// probability coordinate and therefore contributes a zero surrogate term.
double objective_value(const std::vector<std::optional<int>>& sample_answers,
                       const Eigen::VectorXd& advantages, const Eigen::VectorXd& logits_new,
                       const Eigen::VectorXd& probs_old, const Eigen::VectorXd& probs_ref,
                       const ClipConfig& config);

// Exact gradient of objective_value with respect to logits_new. At min/clip
// ties the clipped-branch derivative is used (flat side at the kinks).
Eigen::VectorXd objective_gradient(const std::vector<std::optional<int>>& sample_answers,
                                   const Eigen::VectorXd& advantages,
                                   const Eigen::VectorXd& logits_new,
                                   const Eigen::VectorXd& probs_old,
                                   const Eigen::VectorXd& probs_ref, const ClipConfig& config);

}  // namespace coevo
