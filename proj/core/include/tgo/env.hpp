#pragma once

#include <cstdint>
#include <vector>

#include "tgo/common.hpp"
#include "tgo/policy.hpp"
#include "tgo/rng.hpp"

namespace tgo {

enum class RewardKind { uniform_random, bimodal, constant };

struct RewardSpec {
  RewardKind kind = RewardKind::uniform_random;
  double value = 0.0;  // only read for constant

  static RewardSpec uniform_random() { return {RewardKind::uniform_random, 0.0}; }
  static RewardSpec bimodal() { return {RewardKind::bimodal, 0.0}; }
  static RewardSpec constant(double v) { return {RewardKind::constant, v}; }
};

/// Finite prompt/outcome world with an exact reward table. Everything the
/// paper-style oracles need (Z(x), tau*(x), pi*) is a finite sum here.
struct TabularEnv {
  std::size_t num_prompts = 0;
  std::size_t num_outcomes = 0;
  Matrix rewards;                      // R(x, y)
  Matrix ref_logits;                   // parameters of pi_ref
  std::vector<double> prompt_weights;  // sampling distribution over prompts

  void validate() const;
  TabularPolicy reference_policy() const { return TabularPolicy(ref_logits); }
};

/// One sampled (prompt, outcome) with its latent reward. The reward is
/// carried for bookkeeping only; training code must not look at it.
struct SampleRecord {
  std::size_t prompt_id = 0;
  std::size_t outcome = 0;
  double reward = 0.0;
  std::uint64_t rng_tag = 0;
};

/// Deterministic-in-seed environment constructor. Reference logits are drawn
/// zero-mean normal; prompt weights are uniform.
TabularEnv make_tabular(std::uint64_t seed, std::size_t k, std::size_t m,
                        const RewardSpec& spec);

/// Offline dataset: prompts from prompt_weights, outcomes from the policy.
std::vector<SampleRecord> sample_dataset(const TabularEnv& env, const TabularPolicy& policy,
                                         std::size_t n, RngStream& stream);

/// Continuous-outcome world scored by distance to a per-prompt target point.
/// The temperature is the scale of the MSE surrogate log-likelihood.
struct GaussianSurrogateEnv {
  std::size_t dim = 1;
  std::vector<std::vector<double>> targets;  // one point per prompt
  double temperature = 1.0;
  double noise_scale = 0.0;

  void validate() const;
  /// Reward of an outcome vector: negative mean squared distance to target.
  double reward(std::size_t prompt, const std::vector<double>& outcome) const;
  /// Target plus isotropic noise.
  std::vector<double> sample_outcome(std::size_t prompt, RngStream& stream) const;
};

/// Masked-token world; reward is token accuracy over the masked positions.
struct MaskedTokenEnv {
  std::size_t vocab_size = 2;
  std::size_t seq_len = 1;
  std::vector<std::size_t> mask_set;             // positions scored
  std::vector<std::vector<std::size_t>> true_tokens;  // one sequence per prompt

  void validate() const;
  double reward(std::size_t prompt, const std::vector<std::size_t>& tokens) const;
};

}  // namespace tgo
