#include "tgo/objective.hpp"

#include <algorithm>
#include <cmath>

namespace tgo {

void TGOConfig::validate() const {
  check(beta > 0.0, "tgo config: beta must be positive");
  check(c >= 0.0, "tgo config: c must be nonnegative");
  check(percentile > 0.0 && percentile < 1.0, "tgo config: percentile must lie in (0, 1)");
  check(clip_eps > 0.0, "tgo config: clip_eps must be positive");
}

SampleLoss tgo_sample_loss(double implicit_score, int label, double weight, NumericMode mode,
                           double clip_eps) {
  SampleLoss out;
  if (mode == NumericMode::exact_logsigmoid) {
    // -log sigma(z) = softplus(-z); -log(1 - sigma(z)) = softplus(z).
    if (label == 1) {
      out.value = weight * softplus(-implicit_score);
      out.d_value_d_score = -weight * sigmoid(-implicit_score);
    } else {
      out.value = weight * softplus(implicit_score);
      out.d_value_d_score = weight * sigmoid(implicit_score);
    }
  } else {
    // Clipped reference semantics: the probability assigned to the observed
    // label is clamped into [eps, 1 - eps] before the log, so the loss is
    // bounded and flat in the clipped tails. Inside the clamp the value and
    // derivative agree with the exact mode up to rounding.
    double p = sigmoid(label == 1 ? implicit_score : -implicit_score);
    bool clamped = p < clip_eps || p > 1.0 - clip_eps;
    p = std::min(std::max(p, clip_eps), 1.0 - clip_eps);
    out.value = -weight * std::log(p);
    if (clamped)
      out.d_value_d_score = 0.0;
    else
      out.d_value_d_score = (label == 1 ? -weight : weight) * (1.0 - p);
  }
  return out;
}

LossBreakdown tgo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                       const std::vector<BatchItem>& batch, const Threshold& threshold,
                       const TGOConfig& config) {
  config.validate();
  check(!batch.empty(), "tgo_loss: empty batch");
  check(policy.logits.same_shape(ref.logits), "tgo_loss: policy/ref shape mismatch");

  const std::size_t batch_size = batch.size();
  const double inv_b = 1.0 / static_cast<double>(batch_size);

  LossBreakdown out;
  out.per_sample.reserve(batch_size);
  out.implicit_scores.reserve(batch_size);
  out.gradient = Matrix(policy.logits.rows(), policy.logits.cols());

  for (const BatchItem& item : batch) {
    double theta_logp = log_prob(policy, item.prompt, item.outcome);
    double ref_logp = log_prob(ref, item.prompt, item.outcome);
    double shat = implicit_policy_score(theta_logp, ref_logp, config.beta);

    int label = pseudo_label(item.score, threshold);
    double weight = confidence_weight(item.score, threshold, config.c);
    SampleLoss sample = tgo_sample_loss(shat, label, weight, config.numeric_mode, config.clip_eps);

    out.per_sample.push_back(sample.value);
    out.implicit_scores.push_back(shat);
    out.total += sample.value * inv_b;

    // d shat / d logit(x, j) = beta * (1[j == y] - pi_theta(j | x)).
    std::vector<double> probs = prob_row(policy, item.prompt);
    double coeff = sample.d_value_d_score * config.beta * inv_b;
    for (std::size_t j = 0; j < probs.size(); ++j)
      out.gradient(item.prompt, j) -= coeff * probs[j];
    out.gradient(item.prompt, item.outcome) += coeff;
  }
  return out;
}

double tgo_gradient_check(const TabularPolicy& policy, const TabularPolicy& ref,
                          const std::vector<BatchItem>& batch, const Threshold& threshold,
                          const TGOConfig& config, double h) {
  check(h >= 1e-8 && h <= 1e-3, "tgo_gradient_check: h outside [1e-8, 1e-3]");
  LossBreakdown analytic = tgo_loss(policy, ref, batch, threshold, config);

  double max_rel_err = 0.0;
  TabularPolicy probe = policy;
  for (std::size_t x = 0; x < policy.logits.rows(); ++x) {
    for (std::size_t y = 0; y < policy.logits.cols(); ++y) {
      double g = analytic.gradient(x, y);
      if (std::abs(g) <= 1e-12) continue;
      double orig = probe.logits(x, y);
      probe.logits(x, y) = orig + h;
      double up = tgo_loss(probe, ref, batch, threshold, config).total;
      probe.logits(x, y) = orig - h;
      double down = tgo_loss(probe, ref, batch, threshold, config).total;
      probe.logits(x, y) = orig;
      double fd = (up - down) / (2.0 * h);
      max_rel_err = std::max(max_rel_err, std::abs(fd - g) / std::abs(g));
    }
  }
  return max_rel_err;
}

LossBreakdown dpo_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                       const std::vector<PairItem>& pairs, double beta) {
  check(beta > 0.0, "dpo_loss: beta must be positive");
  check(!pairs.empty(), "dpo_loss: empty pair list");
  check(policy.logits.same_shape(ref.logits), "dpo_loss: policy/ref shape mismatch");

  const double inv_b = 1.0 / static_cast<double>(pairs.size());
  LossBreakdown out;
  out.per_sample.reserve(pairs.size());
  out.implicit_scores.reserve(pairs.size());
  out.gradient = Matrix(policy.logits.rows(), policy.logits.cols());

  for (const PairItem& pair : pairs) {
    check(pair.winner != pair.loser, "dpo_loss: winner and loser must differ");
    double delta_w = log_prob(policy, pair.prompt, pair.winner) -
                     log_prob(ref, pair.prompt, pair.winner);
    double delta_l = log_prob(policy, pair.prompt, pair.loser) -
                     log_prob(ref, pair.prompt, pair.loser);
    double margin = beta * (delta_w - delta_l);
    double value = softplus(-margin);

    out.per_sample.push_back(value);
    out.implicit_scores.push_back(margin);
    out.total += value * inv_b;

    // d margin / d logit(x, j) = beta * (1[j==w] - 1[j==l]); the softmax
    // normalizer cancels between winner and loser.
    double coeff = -sigmoid(-margin) * beta * inv_b;
    out.gradient(pair.prompt, pair.winner) += coeff;
    out.gradient(pair.prompt, pair.loser) -= coeff;
  }
  return out;
}

LossBreakdown sft_loss(const TabularPolicy& policy, const std::vector<PositiveItem>& positives) {
  check(!positives.empty(), "sft_loss: empty positive list");

  const double inv_b = 1.0 / static_cast<double>(positives.size());
  LossBreakdown out;
  out.per_sample.reserve(positives.size());
  out.gradient = Matrix(policy.logits.rows(), policy.logits.cols());

  for (const PositiveItem& item : positives) {
    double logp = log_prob(policy, item.prompt, item.outcome);
    out.per_sample.push_back(-logp);
    out.implicit_scores.push_back(logp);
    out.total += -logp * inv_b;

    std::vector<double> probs = prob_row(policy, item.prompt);
    for (std::size_t j = 0; j < probs.size(); ++j)
      out.gradient(item.prompt, j) += probs[j] * inv_b;
    out.gradient(item.prompt, item.outcome) -= inv_b;
  }
  return out;
}

SurrogateResult tgo_loss_gaussian(const std::vector<double>& prediction,
                                  const std::vector<double>& ref_prediction,
                                  const std::vector<double>& outcome, double temperature,
                                  double score, const Threshold& threshold,
                                  const TGOConfig& config) {
  config.validate();
  check(prediction.size() == outcome.size() && ref_prediction.size() == outcome.size(),
        "tgo_loss_gaussian: length mismatch");

  double theta_logp = surrogate_log_prob_mse(prediction, outcome, temperature);
  double ref_logp = surrogate_log_prob_mse(ref_prediction, outcome, temperature);
  double shat = implicit_policy_score(theta_logp, ref_logp, config.beta);

  int label = pseudo_label(score, threshold);
  double weight = confidence_weight(score, threshold, config.c);
  SampleLoss sample = tgo_sample_loss(shat, label, weight, config.numeric_mode, config.clip_eps);

  SurrogateResult out;
  out.loss = sample.value;
  out.gradient.resize(prediction.size());
  // d theta_logp / d pred_i = -2 (pred_i - outcome_i) / (dim * T).
  double scale = sample.d_value_d_score * config.beta * (-2.0) /
                 (static_cast<double>(prediction.size()) * temperature);
  for (std::size_t i = 0; i < prediction.size(); ++i)
    out.gradient[i] = scale * (prediction[i] - outcome[i]);
  return out;
}

MaskedSurrogateResult tgo_loss_masked(const Matrix& token_logits, const Matrix& ref_token_logits,
                                      const std::vector<std::size_t>& tokens,
                                      const std::vector<std::size_t>& mask, double score,
                                      const Threshold& threshold, const TGOConfig& config) {
  config.validate();
  check(token_logits.same_shape(ref_token_logits), "tgo_loss_masked: logits shape mismatch");
  check(tokens.size() == token_logits.rows(), "tgo_loss_masked: token count mismatch");
  check(!mask.empty(), "tgo_loss_masked: empty mask");

  TabularPolicy theta(token_logits);
  TabularPolicy ref(ref_token_logits);

  std::vector<double> theta_lp(tokens.size(), 0.0);
  for (std::size_t pos : mask) theta_lp[pos] = log_prob(theta, pos, tokens[pos]);
  std::vector<double> ref_lp(tokens.size(), 0.0);
  for (std::size_t pos : mask) ref_lp[pos] = log_prob(ref, pos, tokens[pos]);

  double shat = implicit_policy_score(surrogate_log_prob_masked(theta_lp, mask),
                                      surrogate_log_prob_masked(ref_lp, mask), config.beta);
  int label = pseudo_label(score, threshold);
  double weight = confidence_weight(score, threshold, config.c);
  SampleLoss sample = tgo_sample_loss(shat, label, weight, config.numeric_mode, config.clip_eps);

  MaskedSurrogateResult out;
  out.loss = sample.value;
  out.gradient = Matrix(token_logits.rows(), token_logits.cols());
  double coeff = sample.d_value_d_score * config.beta / static_cast<double>(mask.size());
  for (std::size_t pos : mask) {
    std::vector<double> probs = prob_row(theta, pos);
    for (std::size_t v = 0; v < probs.size(); ++v) out.gradient(pos, v) -= coeff * probs[v];
    out.gradient(pos, tokens[pos]) += coeff;
  }
  return out;
}

}  // namespace tgo
