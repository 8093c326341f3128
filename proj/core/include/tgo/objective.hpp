#pragma once

#include <vector>

#include "tgo/feedback.hpp"
#include "tgo/policy.hpp"

namespace tgo {

enum class NumericMode {
  exact_logsigmoid,  // log sigma(z) as -softplus(-z), no clipping
  clipped_sigmoid,   // log(sigma(z) + eps), reference semantics
};

struct TGOConfig {
  double beta = 1.0;
  double c = 5.0;
  double percentile = 0.5;
  NumericMode numeric_mode = NumericMode::exact_logsigmoid;
  double clip_eps = 1e-12;

  void validate() const;
};

/// One evaluated batch: scalar loss, per-sample terms, and the exact
/// analytic gradient with respect to the policy logits.
struct LossBreakdown {
  double total = 0.0;
  std::vector<double> per_sample;
  std::vector<double> implicit_scores;
  Matrix gradient;
};

/// beta * (log pi_theta - log pi_ref) for one sample.
inline double implicit_policy_score(double theta_logp, double ref_logp, double beta) {
  return beta * (theta_logp - ref_logp);
}

struct BatchItem {
  std::size_t prompt = 0;
  std::size_t outcome = 0;
  double score = 0.0;
};

struct PairItem {
  std::size_t prompt = 0;
  std::size_t winner = 0;
  std::size_t loser = 0;
};

struct PositiveItem {
  std::size_t prompt = 0;
  std::size_t outcome = 0;
};

/// Confidence-weighted binary logistic loss on the implicit policy score,
/// batch mean reduction. Pseudo-label and weight come from the threshold.
LossBreakdown tgo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                       const std::vector<BatchItem>& batch, const Threshold& threshold,
                       const TGOConfig& config);

/// Central finite-difference audit of the analytic gradient. Returns the max
/// relative error over coordinates with non-negligible analytic gradient.
double tgo_gradient_check(const TabularPolicy& policy, const TabularPolicy& ref,
                          const std::vector<BatchItem>& batch, const Threshold& threshold,
                          const TGOConfig& config, double h);

/// Pairwise logistic loss on the margin between winner and loser log-ratios.
LossBreakdown dpo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                       const std::vector<PairItem>& pairs, double beta);

/// Negative mean log-likelihood of the given positives.
LossBreakdown sft_loss(const TabularPolicy& policy, const std::vector<PositiveItem>& positives);

/// Per-sample TGO loss and its derivative with respect to the implicit
/// score. Shared by the tabular path and the surrogate-likelihood paths.
struct SampleLoss {
  double value = 0.0;
  double d_value_d_score = 0.0;
};
SampleLoss tgo_sample_loss(double implicit_score, int label, double weight,
                           NumericMode mode, double clip_eps);

/// TGO loss for one Gaussian-surrogate sample. The policy parameter is the
/// prediction vector; the gradient is with respect to it.
struct SurrogateResult {
  double loss = 0.0;
  std::vector<double> gradient;
};
SurrogateResult tgo_loss_gaussian(const std::vector<double>& prediction,
                                  const std::vector<double>& ref_prediction,
                                  const std::vector<double>& outcome, double temperature,
                                  double score, const Threshold& threshold,
                                  const TGOConfig& config);

/// TGO loss for one masked-token sample. token_logits is [position][vocab];
/// the gradient matches its shape and is nonzero only at masked rows.
struct MaskedSurrogateResult {
  double loss = 0.0;
  Matrix gradient;
};
MaskedSurrogateResult tgo_loss_masked(const Matrix& token_logits, const Matrix& ref_token_logits,
                                      const std::vector<std::size_t>& tokens,
                                      const std::vector<std::size_t>& mask, double score,
                                      const Threshold& threshold, const TGOConfig& config);

}  // namespace tgo
