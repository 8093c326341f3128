#include "tgo/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tgo {

double logsumexp(const double* v, std::size_t n) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double logsumexp(const std::vector<double>& v) { return logsumexp(v.data(), v.size()); }

void TabularEnv::validate() const {
  check(num_prompts >= 1, "env: num_prompts must be positive");
  check(num_outcomes >= 1, "env: num_outcomes must be positive");
  check(rewards.rows() == num_prompts && rewards.cols() == num_outcomes,
        "env: rewards shape mismatch");
  check(ref_logits.same_shape(rewards), "env: ref_logits shape must match rewards");
  check(prompt_weights.size() == num_prompts, "env: prompt_weights size mismatch");
  check(rewards.all_finite() && ref_logits.all_finite(), "env: non-finite entries");
  double total = 0.0;
  for (double w : prompt_weights) {
    check(w >= 0.0 && std::isfinite(w), "env: prompt weights must be nonnegative");
    total += w;
  }
  check(std::abs(total - 1.0) <= 1e-12, "env: prompt_weights must sum to 1");
}

TabularEnv make_tabular(std::uint64_t seed, std::size_t k, std::size_t m,
                        const RewardSpec& spec) {
  check(k >= 1, "make_tabular: k must be >= 1");
  check(m >= 2,
        "make_tabular: m must be >= 2 (policy-ratio monotonicity needs an "
        "alternative outcome)");

  TabularEnv env;
  env.num_prompts = k;
  env.num_outcomes = m;
  env.rewards = Matrix(k, m);
  env.ref_logits = Matrix(k, m);
  env.prompt_weights.assign(k, 1.0 / static_cast<double>(k));

  RngStream reward_stream = RngStream::derive(seed, 0);
  RngStream logit_stream = RngStream::derive(seed, 1);

  for (std::size_t x = 0; x < k; ++x) {
    for (std::size_t y = 0; y < m; ++y) {
      switch (spec.kind) {
        case RewardKind::uniform_random:
          env.rewards(x, y) = reward_stream.uniform(-1.0, 1.0);
          break;
        case RewardKind::bimodal: {
          // Two well-separated modes so percentile thresholds split the
          // outcomes into clear positives and negatives.
          double mode = reward_stream.uniform() < 0.5 ? -1.0 : 1.0;
          env.rewards(x, y) = mode + 0.2 * reward_stream.normal();
          break;
        }
        case RewardKind::constant:
          env.rewards(x, y) = spec.value;
          break;
      }
      env.ref_logits(x, y) = logit_stream.normal();
    }
  }
  env.validate();
  return env;
}

std::vector<SampleRecord> sample_dataset(const TabularEnv& env, const TabularPolicy& policy,
                                         std::size_t n, RngStream& stream) {
  env.validate();
  check(policy.logits.rows() == env.num_prompts && policy.logits.cols() == env.num_outcomes,
        "sample_dataset: policy shape must match env");

  // Precompute probability rows once; sampling then walks the CDF directly.
  std::vector<std::vector<double>> probs(env.num_prompts);
  for (std::size_t x = 0; x < env.num_prompts; ++x) probs[x] = prob_row(policy, x);

  std::vector<SampleRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x = stream.categorical(env.prompt_weights);
    std::size_t y = stream.categorical(probs[x]);
    out.push_back({x, y, env.rewards(x, y), i});
  }
  return out;
}

void GaussianSurrogateEnv::validate() const {
  check(dim >= 1, "gaussian env: dim must be >= 1");
  check(temperature > 0.0, "gaussian env: temperature must be positive");
  check(noise_scale >= 0.0, "gaussian env: noise_scale must be nonnegative");
  check(!targets.empty(), "gaussian env: needs at least one target");
  for (const auto& t : targets)
    check(t.size() == dim, "gaussian env: target dimension mismatch");
}

double GaussianSurrogateEnv::reward(std::size_t prompt, const std::vector<double>& outcome) const {
  check(prompt < targets.size(), "gaussian env: prompt out of range");
  check(outcome.size() == dim, "gaussian env: outcome dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double d = outcome[i] - targets[prompt][i];
    sq += d * d;
  }
  return -sq / static_cast<double>(dim);
}

std::vector<double> GaussianSurrogateEnv::sample_outcome(std::size_t prompt,
                                                         RngStream& stream) const {
  check(prompt < targets.size(), "gaussian env: prompt out of range");
  std::vector<double> y = targets[prompt];
  for (double& v : y) v += noise_scale * stream.normal();
  return y;
}

void MaskedTokenEnv::validate() const {
  check(vocab_size >= 1, "masked env: vocab_size must be >= 1");
  check(seq_len >= 1, "masked env: seq_len must be >= 1");
  check(!mask_set.empty(), "masked env: mask_set must be nonempty");
  for (std::size_t pos : mask_set) check(pos < seq_len, "masked env: mask position out of range");
  check(!true_tokens.empty(), "masked env: needs at least one prompt");
  for (const auto& seq : true_tokens) {
    check(seq.size() == seq_len, "masked env: token sequence length mismatch");
    for (std::size_t t : seq) check(t < vocab_size, "masked env: token index out of range");
  }
}

double MaskedTokenEnv::reward(std::size_t prompt, const std::vector<std::size_t>& tokens) const {
  check(prompt < true_tokens.size(), "masked env: prompt out of range");
  check(tokens.size() == seq_len, "masked env: token sequence length mismatch");
  std::size_t hits = 0;
  for (std::size_t pos : mask_set)
    if (tokens[pos] == true_tokens[prompt][pos]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(mask_set.size());
}

}  // namespace tgo
