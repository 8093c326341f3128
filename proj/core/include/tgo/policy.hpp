#pragma once

#include <cstddef>
#include <vector>

#include "tgo/common.hpp"

namespace tgo {

struct TabularEnv;

/// Per-prompt softmax policy over a finite outcome space. Stores logits,
/// never probabilities, so ratios and gradients stay exact in log space.
struct TabularPolicy {
  Matrix logits;

  TabularPolicy() = default;
  explicit TabularPolicy(Matrix l) : logits(std::move(l)) {}

  std::size_t num_prompts() const { return logits.rows(); }
  std::size_t num_outcomes() const { return logits.cols(); }

  void validate() const;
};

/// Uniform policy of the given shape.
TabularPolicy uniform_policy(std::size_t num_prompts, std::size_t num_outcomes);

/// log pi(outcome | prompt) = logit - logsumexp(row).
double log_prob(const TabularPolicy& policy, std::size_t prompt, std::size_t outcome);

/// Full row of log-probabilities for one prompt.
std::vector<double> log_prob_row(const TabularPolicy& policy, std::size_t prompt);

/// Full row of probabilities for one prompt.
std::vector<double> prob_row(const TabularPolicy& policy, std::size_t prompt);

/// Z(x): sum over outcomes of pi_ref(y|x) * exp(R(x,y) / beta). Computed
/// through a logsumexp shift; large rewards over small beta stay finite in
/// the log domain even when exp(Z) itself would not.
double partition_function(const TabularPolicy& ref, const TabularEnv& env, double beta,
                          std::size_t prompt);

/// log Z(x), the quantity the baseline actually needs.
double log_partition_function(const TabularPolicy& ref, const TabularEnv& env, double beta,
                              std::size_t prompt);

/// Instance-dependent baseline beta * log Z(x).
double oracle_baseline(const TabularPolicy& ref, const TabularEnv& env, double beta,
                       std::size_t prompt);

/// Per-prompt partition functions and baselines, bundled.
struct OracleReport {
  std::vector<double> partition;
  std::vector<double> baseline;
  double beta = 1.0;
};

OracleReport oracle_report(const TabularPolicy& ref, const TabularEnv& env, double beta);

/// Closed-form KL-regularized optimum: logits are ref logits plus rewards/beta.
TabularPolicy optimal_policy(const TabularPolicy& ref, const TabularEnv& env, double beta);

/// KL(p || q) for one prompt row.
double kl_divergence(const TabularPolicy& p, const TabularPolicy& q, std::size_t prompt);

/// Prompt-weighted KL(p || q) across the whole environment.
double mean_kl_divergence(const TabularPolicy& p, const TabularPolicy& q, const TabularEnv& env);

/// Gaussian-observation surrogate: log pi ~ -MSE(prediction, target) / T.
double surrogate_log_prob_mse(const std::vector<double>& prediction,
                              const std::vector<double>& target, double temperature);

/// Masked-token surrogate: mean of per-position log-probs over the mask only.
double surrogate_log_prob_masked(const std::vector<double>& token_log_probs,
                                 const std::vector<std::size_t>& mask);

}  // namespace tgo
