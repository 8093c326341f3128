#include "tgo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tgo {

void TrainConfig::validate() const {
  check(batch_size >= 1, "train config: batch_size must be >= 1");
  check(epochs >= 1, "train config: epochs must be >= 1");
  check(learning_rate >= 0.0, "train config: learning_rate must be nonnegative");
  if (optimizer == Optimizer::sgd_momentum)
    check(momentum >= 0.0 && momentum < 1.0, "train config: momentum must lie in [0, 1)");
  tgo.validate();
}

double weighted_quantile(std::vector<std::pair<double, double>> value_weight, double p) {
  check(!value_weight.empty(), "weighted_quantile: empty distribution");
  std::sort(value_weight.begin(), value_weight.end());
  double total = 0.0;
  for (const auto& [v, w] : value_weight) total += w;
  double acc = 0.0;
  for (const auto& [v, w] : value_weight) {
    acc += w;
    if (acc >= p * total) return v;
  }
  return value_weight.back().first;
}

PolicyEvaluation evaluate_policy(const TabularEnv& env, const TabularPolicy& policy) {
  env.validate();
  check(policy.logits.rows() == env.num_prompts && policy.logits.cols() == env.num_outcomes,
        "evaluate_policy: policy shape must match env");

  PolicyEvaluation eval;
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(env.num_prompts * env.num_outcomes);
  for (std::size_t x = 0; x < env.num_prompts; ++x) {
    std::vector<double> probs = prob_row(policy, x);
    for (std::size_t y = 0; y < env.num_outcomes; ++y) {
      double w = env.prompt_weights[x] * probs[y];
      eval.mean_reward += w * env.rewards(x, y);
      atoms.emplace_back(env.rewards(x, y), w);
    }
  }
  eval.median_reward = weighted_quantile(atoms, 0.5);
  for (int d = 1; d <= 9; ++d)
    eval.reward_quantiles.push_back(weighted_quantile(atoms, 0.1 * d));
  return eval;
}

namespace {

// Score-ordered pairs for the DPO baseline: records of the same prompt are
// shuffled and paired off; equal-score pairs carry no signal and are dropped.
std::vector<PairItem> build_pairs(const ScoredDataset& scored, std::size_t num_prompts,
                                  RngStream& stream) {
  std::vector<std::vector<std::size_t>> by_prompt(num_prompts);
  for (std::size_t i = 0; i < scored.records.size(); ++i)
    by_prompt[scored.records[i].prompt_id].push_back(i);

  std::vector<PairItem> pairs;
  for (auto& idx : by_prompt) {
    stream.shuffle(idx);
    for (std::size_t i = 0; i + 1 < idx.size(); i += 2) {
      const ScoredRecord& a = scored.records[idx[i]];
      const ScoredRecord& b = scored.records[idx[i + 1]];
      if (a.score == b.score || a.outcome == b.outcome) continue;
      if (a.score > b.score)
        pairs.push_back({a.prompt_id, a.outcome, b.outcome});
      else
        pairs.push_back({b.prompt_id, b.outcome, a.outcome});
    }
  }
  return pairs;
}

void apply_update(TabularPolicy& theta, Matrix& velocity, const Matrix& gradient,
                  const TrainConfig& config) {
  if (config.optimizer == Optimizer::sgd_momentum) {
    for (std::size_t i = 0; i < velocity.data().size(); ++i)
      velocity.data()[i] = config.momentum * velocity.data()[i] + gradient.data()[i];
    for (std::size_t i = 0; i < theta.logits.data().size(); ++i)
      theta.logits.data()[i] -= config.learning_rate * velocity.data()[i];
  } else {
    for (std::size_t i = 0; i < theta.logits.data().size(); ++i)
      theta.logits.data()[i] -= config.learning_rate * gradient.data()[i];
  }
}

}  // namespace

TrainReport run_offline(const TabularEnv& env, const TabularPolicy& initial_policy,
                        const ScoreModel& score_model, std::size_t n_samples,
                        const TrainConfig& config) {
  config.validate();
  env.validate();
  check(n_samples >= config.batch_size, "run_offline: n_samples must be >= batch_size");
  check(initial_policy.logits.rows() == env.num_prompts &&
            initial_policy.logits.cols() == env.num_outcomes,
        "run_offline: policy shape must match env");

  RngStream data_stream = RngStream::derive(config.seed, 0);
  RngStream score_stream = RngStream::derive(config.seed, 1);
  RngStream shuffle_stream = RngStream::derive(config.seed, 2);
  RngStream proxy_stream = RngStream::derive(config.seed, 3);

  // Line 1: freeze the reference. Line 2: sample and score the dataset from
  // it, once. Line 3: estimate the threshold from those scores.
  TabularPolicy ref = initial_policy;
  TabularPolicy theta = initial_policy;
  const TabularPolicy optimum = optimal_policy(ref, env, config.tgo.beta);

  std::vector<SampleRecord> samples = sample_dataset(env, ref, n_samples, data_stream);
  ScoredDataset scored = score_dataset(samples, score_model, score_stream, "reference");

  std::vector<double> scores;
  scores.reserve(scored.records.size());
  for (const ScoredRecord& r : scored.records) scores.push_back(r.score);
  Threshold threshold =
      estimate_threshold(scores, config.tgo.percentile, config.quantile_method);

  TrainReport report;
  report.threshold_history.push_back(threshold);

  std::vector<PairItem> pairs;
  std::vector<PositiveItem> positives;
  if (config.objective == Objective::dpo) {
    pairs = build_pairs(scored, env.num_prompts, shuffle_stream);
    check(!pairs.empty(), "run_offline: no usable preference pairs in the dataset");
  } else if (config.objective == Objective::sft) {
    for (const ScoredRecord& r : scored.records)
      if (pseudo_label(r.score, threshold) == 1) positives.push_back({r.prompt_id, r.outcome});
    check(!positives.empty(), "run_offline: no pseudo-positive samples for sft");
  }

  auto record_epoch = [&](const TabularPolicy& current_ref) {
    report.mean_reward_curve.push_back(evaluate_policy(env, theta).mean_reward);
    report.kl_to_ref_curve.push_back(mean_kl_divergence(theta, current_ref, env));
    report.kl_to_optimal_curve.push_back(mean_kl_divergence(theta, optimum, env));
  };
  record_epoch(ref);

  Matrix velocity(theta.logits.rows(), theta.logits.cols());
  std::size_t step_index = 0;

  std::size_t unit_count = config.objective == Objective::dpo    ? pairs.size()
                           : config.objective == Objective::sft ? positives.size()
                                                                : scored.records.size();
  std::vector<std::size_t> order(unit_count);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_stream.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t stop = std::min(start + config.batch_size, order.size());
      // The shuffle decides batch membership only; summing in dataset order
      // makes the loss of a given batch independent of the shuffle.
      std::vector<std::size_t> batch_idx(order.begin() + start, order.begin() + stop);
      std::sort(batch_idx.begin(), batch_idx.end());
      double loss_value = 0.0;
      Matrix gradient;

      if (config.objective == Objective::tgo) {
        std::vector<BatchItem> batch;
        batch.reserve(batch_idx.size());
        for (std::size_t i : batch_idx) {
          const ScoredRecord& r = scored.records[i];
          batch.push_back({r.prompt_id, r.outcome, r.score});
        }
        LossBreakdown lb = tgo_loss(theta, ref, batch, threshold, config.tgo);
        loss_value = lb.total;
        gradient = std::move(lb.gradient);
      } else if (config.objective == Objective::dpo) {
        std::vector<PairItem> batch;
        for (std::size_t i : batch_idx) batch.push_back(pairs[i]);
        LossBreakdown lb = dpo_loss(theta, ref, batch, config.tgo.beta);
        loss_value = lb.total;
        gradient = std::move(lb.gradient);
      } else {
        std::vector<PositiveItem> batch;
        for (std::size_t i : batch_idx) batch.push_back(positives[i]);
        LossBreakdown lb = sft_loss(theta, batch);
        loss_value = lb.total;
        gradient = std::move(lb.gradient);
      }

      if (!std::isfinite(loss_value))
        throw std::runtime_error("run_offline: non-finite loss at step " +
                                 std::to_string(step_index));
      report.loss_curve.push_back(loss_value);
      apply_update(theta, velocity, gradient, config);
      ++step_index;
    }

    if (config.refresh_reference) {
      ref = theta;
      if (config.reestimate_threshold_on_refresh) {
        // Dataset scores stay fixed; only the threshold is refreshed, from a
        // proxy set drawn under the new reference.
        threshold = proxy_threshold(ref, env, score_model, n_samples, config.tgo.percentile,
                                    proxy_stream, config.quantile_method);
        report.threshold_history.push_back(threshold);
      }
    }
    record_epoch(ref);
  }

  report.final_policy = std::move(theta);
  return report;
}

}  // namespace tgo
