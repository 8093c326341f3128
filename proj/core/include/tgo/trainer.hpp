#pragma once

#include <cstdint>
#include <vector>

#include "tgo/env.hpp"
#include "tgo/feedback.hpp"
#include "tgo/objective.hpp"

namespace tgo {

enum class Optimizer { sgd, sgd_momentum };
enum class Objective { tgo, dpo, sft };

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double learning_rate = 0.1;
  Optimizer optimizer = Optimizer::sgd;
  double momentum = 0.9;  // only read for sgd_momentum
  bool refresh_reference = false;
  bool reestimate_threshold_on_refresh = true;
  std::uint64_t seed = 0;
  Objective objective = Objective::tgo;
  TGOConfig tgo;
  QuantileMethod quantile_method = QuantileMethod::linear_interpolation;

  void validate() const;
};

struct TrainReport {
  std::vector<double> loss_curve;             // one entry per optimizer step
  std::vector<double> mean_reward_curve;      // per epoch, entry 0 = initial
  std::vector<double> kl_to_ref_curve;        // per epoch, entry 0 = initial
  std::vector<double> kl_to_optimal_curve;    // per epoch, entry 0 = initial
  TabularPolicy final_policy;
  std::vector<Threshold> threshold_history;
};

/// Offline loop: freeze the reference as a copy of the initial policy,
/// sample and score the dataset from it once, estimate the threshold, then
/// run epoch-wise shuffled minibatch updates. Deterministic given the seed.
/// Scores are never recomputed; when the reference is refreshed and
/// reestimate_threshold_on_refresh is set, the threshold is re-estimated
/// from a fresh proxy set drawn from the refreshed reference.
TrainReport run_offline(const TabularEnv& env, const TabularPolicy& initial_policy,
                        const ScoreModel& score_model, std::size_t n_samples,
                        const TrainConfig& config);

struct PolicyEvaluation {
  double mean_reward = 0.0;
  double median_reward = 0.0;
  std::vector<double> reward_quantiles;  // deciles 0.1..0.9
};

/// Exact expectation and quantiles of the reward distribution under the
/// policy (weighted discrete distribution; no sampling involved).
PolicyEvaluation evaluate_policy(const TabularEnv& env, const TabularPolicy& policy);

/// Quantile of a weighted discrete distribution: smallest atom whose
/// cumulative weight reaches p.
double weighted_quantile(std::vector<std::pair<double, double>> value_weight, double p);

}  // namespace tgo
