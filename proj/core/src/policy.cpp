#include "tgo/policy.hpp"

#include <cmath>

#include "tgo/env.hpp"

namespace tgo {

void TabularPolicy::validate() const {
  check(logits.rows() >= 1 && logits.cols() >= 1, "policy: empty logits");
  check(logits.all_finite(), "policy: non-finite logits");
}

TabularPolicy uniform_policy(std::size_t num_prompts, std::size_t num_outcomes) {
  return TabularPolicy(Matrix(num_prompts, num_outcomes, 0.0));
}

double log_prob(const TabularPolicy& policy, std::size_t prompt, std::size_t outcome) {
  check(prompt < policy.num_prompts(), "log_prob: prompt index out of range");
  check(outcome < policy.num_outcomes(), "log_prob: outcome index out of range");
  const double* row = policy.logits.row_ptr(prompt);
  return row[outcome] - logsumexp(row, policy.num_outcomes());
}

std::vector<double> log_prob_row(const TabularPolicy& policy, std::size_t prompt) {
  check(prompt < policy.num_prompts(), "log_prob_row: prompt index out of range");
  const double* row = policy.logits.row_ptr(prompt);
  const std::size_t m = policy.num_outcomes();
  double lse = logsumexp(row, m);
  std::vector<double> out(m);
  for (std::size_t y = 0; y < m; ++y) out[y] = row[y] - lse;
  return out;
}

std::vector<double> prob_row(const TabularPolicy& policy, std::size_t prompt) {
  std::vector<double> out = log_prob_row(policy, prompt);
  for (double& v : out) v = std::exp(v);
  return out;
}

double log_partition_function(const TabularPolicy& ref, const TabularEnv& env, double beta,
                              std::size_t prompt) {
  check(beta > 0.0, "partition_function: beta must be positive");
  check(prompt < env.num_prompts, "partition_function: prompt index out of range");
  check(ref.logits.rows() == env.num_prompts && ref.logits.cols() == env.num_outcomes,
        "partition_function: ref shape must match env");
  const std::size_t m = env.num_outcomes;
  std::vector<double> terms = log_prob_row(ref, prompt);
  for (std::size_t y = 0; y < m; ++y) terms[y] += env.rewards(prompt, y) / beta;
  return logsumexp(terms);
}

double partition_function(const TabularPolicy& ref, const TabularEnv& env, double beta,
                          std::size_t prompt) {
  return std::exp(log_partition_function(ref, env, beta, prompt));
}

double oracle_baseline(const TabularPolicy& ref, const TabularEnv& env, double beta,
                       std::size_t prompt) {
  return beta * log_partition_function(ref, env, beta, prompt);
}

OracleReport oracle_report(const TabularPolicy& ref, const TabularEnv& env, double beta) {
  OracleReport report;
  report.beta = beta;
  report.partition.reserve(env.num_prompts);
  report.baseline.reserve(env.num_prompts);
  for (std::size_t x = 0; x < env.num_prompts; ++x) {
    double log_z = log_partition_function(ref, env, beta, x);
    report.partition.push_back(std::exp(log_z));
    report.baseline.push_back(beta * log_z);
  }
  return report;
}

TabularPolicy optimal_policy(const TabularPolicy& ref, const TabularEnv& env, double beta) {
  check(beta > 0.0, "optimal_policy: beta must be positive");
  check(ref.logits.rows() == env.num_prompts && ref.logits.cols() == env.num_outcomes,
        "optimal_policy: ref shape must match env");
  // pi* ~ pi_ref * exp(R / beta), so in logit form the reward shift adds on.
  Matrix logits = ref.logits;
  for (std::size_t x = 0; x < env.num_prompts; ++x)
    for (std::size_t y = 0; y < env.num_outcomes; ++y)
      logits(x, y) += env.rewards(x, y) / beta;
  return TabularPolicy(std::move(logits));
}

double kl_divergence(const TabularPolicy& p, const TabularPolicy& q, std::size_t prompt) {
  check(p.logits.same_shape(q.logits), "kl_divergence: shape mismatch");
  check(prompt < p.num_prompts(), "kl_divergence: prompt index out of range");
  std::vector<double> lp = log_prob_row(p, prompt);
  std::vector<double> lq = log_prob_row(q, prompt);
  double kl = 0.0;
  for (std::size_t y = 0; y < lp.size(); ++y) kl += std::exp(lp[y]) * (lp[y] - lq[y]);
  return std::max(kl, 0.0);  // clamp the tiny negative round-off at p == q
}

double mean_kl_divergence(const TabularPolicy& p, const TabularPolicy& q, const TabularEnv& env) {
  double total = 0.0;
  for (std::size_t x = 0; x < env.num_prompts; ++x)
    total += env.prompt_weights[x] * kl_divergence(p, q, x);
  return total;
}

double surrogate_log_prob_mse(const std::vector<double>& prediction,
                              const std::vector<double>& target, double temperature) {
  check(prediction.size() == target.size(), "surrogate_log_prob_mse: length mismatch");
  check(!prediction.empty(), "surrogate_log_prob_mse: empty vectors");
  check(temperature > 0.0, "surrogate_log_prob_mse: temperature must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    double d = prediction[i] - target[i];
    sq += d * d;
  }
  return -(sq / static_cast<double>(prediction.size())) / temperature;
}

double surrogate_log_prob_masked(const std::vector<double>& token_log_probs,
                                 const std::vector<std::size_t>& mask) {
  check(!mask.empty(), "surrogate_log_prob_masked: mask must be nonempty");
  double sum = 0.0;
  for (std::size_t pos : mask) {
    check(pos < token_log_probs.size(), "surrogate_log_prob_masked: mask position out of range");
    sum += token_log_probs[pos];
  }
  return sum / static_cast<double>(mask.size());
}

}  // namespace tgo
