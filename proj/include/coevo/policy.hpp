#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "coevo/answers.hpp"

// Desk-scale stand-ins for language models: per-question categorical answer
// policies. Initialization places a discretized Gaussian around the ground
// truth shifted by a model-specific bias, so ensemble-averaging predictions
// stay testable in the discrete answer space.

namespace coevo {

struct TaskInstance {
  std::string question_id;
  std::string domain_tag;
  std::vector<std::string> vocabulary;  // ordered; index is the answer line
  int ground_truth_index = 0;

  const std::string& ground_truth() const { return vocabulary[ground_truth_index]; }
};

struct BiasModelSpec {
  int n_models = 1;
  int k_samples = 1;
  double bias_std = 1.0;                    // std of the zero-mean bias draw
  double noise_std = 1.5;                   // default per-model sigma
  std::vector<double> noise_std_per_model;  // optional override, length n_models
  std::vector<double> bias_std_per_model;   // optional override, length n_models
  std::vector<double> fixed_biases;         // optional deterministic biases, length n_models

  double sigma_for(int model_index) const {
    return noise_std_per_model.empty() ? noise_std : noise_std_per_model[model_index];
  }
  double bias_sigma_for(int model_index) const {
    return bias_std_per_model.empty() ? bias_std : bias_std_per_model[model_index];
  }
};

struct CategoricalPolicy {
  std::string model_id;
  std::map<std::string, Eigen::VectorXd> logits;      // live, keyed by question
  std::map<std::string, Eigen::VectorXd> ref_logits;  // frozen at initialization
  std::map<std::string, double> skill_profile;        // domain -> competence (scales 1/sigma)

  const Eigen::VectorXd& logits_for(const std::string& question_id) const;
  Eigen::VectorXd probs(const std::string& question_id) const;
  Eigen::VectorXd ref_probs(const std::string& question_id) const;
  double competence(const std::string& domain_tag) const;
};

// One policy per model. Logits for answer j are -(j - center)^2 / (2 sigma^2)
// with center = ground truth + the model's quantized bias and sigma shrunk
// by the model's competence in the task's domain. Biases come from
// spec.fixed_biases when given, otherwise drawn N(0, bias_std) independently
// per (model, question).
std::vector<CategoricalPolicy> init_policies(const std::vector<TaskInstance>& tasks,
                                             const BiasModelSpec& spec,
                                             const std::vector<std::map<std::string, double>>&
                                                 skill_profiles,  // may be empty
                                             std::uint64_t seed);

// k independent draws from the policy's categorical distribution for the
// task. A positive invalid_fraction marks round(f*k) samples Invalid at
// deterministically striped positions; the underlying draw sequence does not
// depend on the masking.
std::vector<AnswerSample> sample_answers(const CategoricalPolicy& policy,
                                         const TaskInstance& task, int k,
                                         double invalid_fraction, std::mt19937_64& engine);
std::vector<AnswerSample> sample_answers(const CategoricalPolicy& policy,
                                         const TaskInstance& task, int k, std::uint64_t seed,
                                         double invalid_fraction = 0.0);

// Gradient-ascent step on one question's logits. Reference and snapshot
// copies are unaffected. Throws ShapeMismatchError on size disagreement.
void apply_update(CategoricalPolicy& policy, const std::string& question_id,
                  const Eigen::VectorXd& gradient, double learning_rate);

// Text checkpoint, full double precision, load(save(x)) == x.
void save_checkpoint(const std::vector<CategoricalPolicy>& policies,
                     const std::filesystem::path& path);
std::vector<CategoricalPolicy> load_checkpoint(const std::filesystem::path& path);

}  // namespace coevo
