#include "coevo/policy.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "coevo/errors.hpp"
#include "coevo/grpo.hpp"
#include "coevo/io.hpp"
#include "coevo/rng.hpp"

namespace coevo {

const Eigen::VectorXd& CategoricalPolicy::logits_for(const std::string& question_id) const {
  const auto it = logits.find(question_id);
  if (it == logits.end()) {
    throw ShapeMismatchError("policy '" + model_id + "' has no logits for question '" +
                             question_id + "'");
  }
  return it->second;
}

Eigen::VectorXd CategoricalPolicy::probs(const std::string& question_id) const {
  return softmax(logits_for(question_id));
}

Eigen::VectorXd CategoricalPolicy::ref_probs(const std::string& question_id) const {
  const auto it = ref_logits.find(question_id);
  if (it == ref_logits.end()) {
    throw ShapeMismatchError("policy '" + model_id + "' has no reference logits for question '" +
                             question_id + "'");
  }
  return softmax(it->second);
}

double CategoricalPolicy::competence(const std::string& domain_tag) const {
  const auto it = skill_profile.find(domain_tag);
  return it == skill_profile.end() ? 1.0 : it->second;
}

std::vector<CategoricalPolicy> init_policies(
    const std::vector<TaskInstance>& tasks, const BiasModelSpec& spec,
    const std::vector<std::map<std::string, double>>& skill_profiles, std::uint64_t seed) {
  if (!spec.fixed_biases.empty() &&
      static_cast<int>(spec.fixed_biases.size()) != spec.n_models) {
    throw ConfigError("fixed_biases must list one bias per model");
  }
  if (!spec.noise_std_per_model.empty() &&
      static_cast<int>(spec.noise_std_per_model.size()) != spec.n_models) {
    throw ConfigError("noise_std_per_model must list one sigma per model");
  }
  if (!spec.bias_std_per_model.empty() &&
      static_cast<int>(spec.bias_std_per_model.size()) != spec.n_models) {
    throw ConfigError("bias_std_per_model must list one std per model");
  }

  std::vector<CategoricalPolicy> policies(spec.n_models);
  for (int m = 0; m < spec.n_models; ++m) {
    auto& policy = policies[m];
    policy.model_id = "m" + std::to_string(m);
    if (m < static_cast<int>(skill_profiles.size())) policy.skill_profile = skill_profiles[m];

    for (const auto& task : tasks) {
      double bias;
      if (!spec.fixed_biases.empty()) {
        bias = spec.fixed_biases[m];
      } else {
        auto g = stream(seed, streams::kBiasDraw, static_cast<std::uint64_t>(m),
                        fnv1a64(task.question_id));
        bias = normal(g, 0.0, spec.bias_sigma_for(m));
      }
      // Quantize onto the integer answer line.
      const double center = task.ground_truth_index + static_cast<double>(std::llround(bias));
      const double sigma = spec.sigma_for(m) / policy.competence(task.domain_tag);

      const int vocab = static_cast<int>(task.vocabulary.size());
      Eigen::VectorXd logits(vocab);
      for (int j = 0; j < vocab; ++j) {
        const double d = static_cast<double>(j) - center;
        logits[j] = -(d * d) / (2.0 * sigma * sigma);
      }
      policy.logits[task.question_id] = logits;
      policy.ref_logits[task.question_id] = logits;
    }
  }
  return policies;
}

std::vector<AnswerSample> sample_answers(const CategoricalPolicy& policy,
                                         const TaskInstance& task, int k,
                                         double invalid_fraction, std::mt19937_64& engine) {
  const Eigen::VectorXd probs = policy.probs(task.question_id);
  const int n_invalid = static_cast<int>(std::llround(invalid_fraction * k));

  std::vector<AnswerSample> samples;
  samples.reserve(k);
  for (int i = 0; i < k; ++i) {
    AnswerSample s;
    s.question_id = task.question_id;
    s.model_id = policy.model_id;
    s.sample_index = i;
    s.answer = task.vocabulary[categorical(probs, engine)];
    samples.push_back(std::move(s));
  }
  // Striped masking: slot i goes invalid where the Bresenham-style counter
  // ticks, giving exactly n_invalid evenly spread slots.
  for (int i = 0; i < k; ++i) {
    if ((i + 1) * n_invalid / k > i * n_invalid / k) samples[i].answer.reset();
  }
  return samples;
}

std::vector<AnswerSample> sample_answers(const CategoricalPolicy& policy,
                                         const TaskInstance& task, int k, std::uint64_t seed,
                                         double invalid_fraction) {
  auto engine = stream(seed, streams::kTrainSample, fnv1a64(policy.model_id),
                       fnv1a64(task.question_id));
  return sample_answers(policy, task, k, invalid_fraction, engine);
}

void apply_update(CategoricalPolicy& policy, const std::string& question_id,
                  const Eigen::VectorXd& gradient, double learning_rate) {
  auto it = policy.logits.find(question_id);
  if (it == policy.logits.end()) {
    throw ShapeMismatchError("apply_update: unknown question '" + question_id + "'");
  }
  if (it->second.size() != gradient.size()) {
    throw ShapeMismatchError("apply_update: gradient size does not match logits");
  }
  it->second += learning_rate * gradient;
}

namespace {

void write_vector_line(std::ostream& out, const char* key, const std::string& question_id,
                       const Eigen::VectorXd& v) {
  out << key << ' ' << question_id;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v[i];
  out << '\n';
}

Eigen::VectorXd parse_vector(std::istringstream& in, long line_no) {
  std::vector<double> values;
  double x;
  while (in >> x) values.push_back(x);
  if (values.empty()) throw ParseError("checkpoint: empty logit vector", line_no);
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void save_checkpoint(const std::vector<CategoricalPolicy>& policies,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "coevo.checkpoint.v1\n";
  for (const auto& policy : policies) {
    out << "model " << policy.model_id << '\n';
    for (const auto& [domain, competence] : policy.skill_profile) {
      out << "skill " << domain << ' ' << competence << '\n';
    }
    for (const auto& [qid, v] : policy.logits) write_vector_line(out, "logits", qid, v);
    for (const auto& [qid, v] : policy.ref_logits) write_vector_line(out, "ref_logits", qid, v);
  }
  write_file_atomic(path, out.str());
}

std::vector<CategoricalPolicy> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || line != "coevo.checkpoint.v1") {
    throw ParseError("checkpoint: missing 'coevo.checkpoint.v1' header", 1);
  }
  ++line_no;

  std::vector<CategoricalPolicy> policies;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string keyword;
    fields >> keyword;
    if (keyword == "model") {
      CategoricalPolicy policy;
      if (!(fields >> policy.model_id)) throw ParseError("checkpoint: model id missing", line_no);
      policies.push_back(std::move(policy));
      continue;
    }
    if (policies.empty()) throw ParseError("checkpoint: record before any model", line_no);
    auto& policy = policies.back();
    if (keyword == "skill") {
      std::string domain;
      double competence;
      if (!(fields >> domain >> competence)) {
        throw ParseError("checkpoint: malformed skill record", line_no);
      }
      policy.skill_profile[domain] = competence;
    } else if (keyword == "logits" || keyword == "ref_logits") {
      std::string qid;
      if (!(fields >> qid)) throw ParseError("checkpoint: question id missing", line_no);
      auto v = parse_vector(fields, line_no);
      (keyword == "logits" ? policy.logits : policy.ref_logits)[qid] = std::move(v);
    } else {
      throw ParseError("checkpoint: unknown record '" + keyword + "'", line_no);
    }
  }
  return policies;
}

}  // namespace coevo
