#include "tgo/feedback.hpp"

#include <algorithm>
#include <cmath>

namespace tgo {

double ScoreTransform::apply(double reward) const {
  switch (kind) {
    case TransformKind::identity:
      return reward;
    case TransformKind::affine:
      return a * reward + b;
    case TransformKind::logistic_squash:
      return sigmoid(reward);
  }
  return reward;
}

void ScoreModel::validate() const {
  if (transform.kind == TransformKind::affine)
    check(transform.a > 0.0, "score model: affine slope must be positive");
  check(noise_scale >= 0.0, "score model: noise_scale must be nonnegative");
}

double score_sample(const ScoreModel& model, double reward, RngStream& stream) {
  model.validate();
  double s = model.transform.apply(reward);
  if (model.noise_scale > 0.0) {
    switch (model.noise) {
      case NoiseKind::gaussian:
        s += model.noise_scale * stream.normal();
        break;
      case NoiseKind::bounded_uniform:
        s += model.noise_scale * stream.uniform(-1.0, 1.0);
        break;
    }
  }
  return s;
}

ScoredDataset score_dataset(const std::vector<SampleRecord>& samples, const ScoreModel& model,
                            RngStream& stream, std::string source_tag) {
  ScoredDataset out;
  out.source_policy_tag = std::move(source_tag);
  out.records.reserve(samples.size());
  for (const SampleRecord& r : samples)
    out.records.push_back({r.prompt_id, r.outcome, score_sample(model, r.reward, stream)});
  return out;
}

Threshold estimate_threshold(std::vector<double> scores, double p, QuantileMethod method) {
  check(!scores.empty(), "estimate_threshold: scores must be nonempty");
  check(p > 0.0 && p < 1.0, "estimate_threshold: p must lie in (0, 1)");
  for (double s : scores) check(std::isfinite(s), "estimate_threshold: non-finite score");

  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();

  Threshold t;
  t.percentile = p;
  t.method = method;
  t.sample_count = n;

  if (method == QuantileMethod::nearest_rank) {
    // ceil(p * n)-th order statistic, 1-based.
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::min(std::max<std::size_t>(rank, 1), n);
    t.value = scores[rank - 1];
  } else {
    double h = p * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, n - 1);
    double frac = h - static_cast<double>(lo);
    t.value = (1.0 - frac) * scores[lo] + frac * scores[hi];
  }

  // Asymptotic quantile standard error sqrt(p(1-p)/n) / f(q), with the
  // density estimated from the spacing of nearby order statistics.
  if (n >= 3) {
    double h = p * static_cast<double>(n - 1);
    std::size_t center = static_cast<std::size_t>(std::llround(h));
    std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt((double)n) / 2));
    std::size_t lo = center > k ? center - k : 0;
    std::size_t hi = std::min(center + k, n - 1);
    double spread = scores[hi] - scores[lo];
    if (spread > 0.0) {
      double density = (static_cast<double>(hi - lo) / static_cast<double>(n - 1)) / spread;
      t.quantile_std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n)) / density;
    }
  }
  return t;
}

double calibration_error(const ScoredDataset& dataset, const TabularEnv& env, double beta,
                         const Threshold& threshold) {
  check(!dataset.records.empty(), "calibration_error: empty dataset");
  env.validate();
  TabularPolicy ref = env.reference_policy();
  std::vector<double> baselines(env.num_prompts);
  for (std::size_t x = 0; x < env.num_prompts; ++x)
    baselines[x] = oracle_baseline(ref, env, beta, x);

  std::size_t disagreements = 0;
  for (const ScoredRecord& r : dataset.records) {
    check(r.prompt_id < env.num_prompts && r.outcome < env.num_outcomes,
          "calibration_error: record outside environment");
    int l = pseudo_label(r.score, threshold);
    int l_star = env.rewards(r.prompt_id, r.outcome) >= baselines[r.prompt_id] ? 1 : 0;
    if (l != l_star) ++disagreements;
  }
  return static_cast<double>(disagreements) / static_cast<double>(dataset.records.size());
}

Threshold proxy_threshold(const TabularPolicy& ref_policy, const TabularEnv& env,
                          const ScoreModel& model, std::size_t n_proxy, double p,
                          RngStream& stream, QuantileMethod method) {
  check(n_proxy >= 1, "proxy_threshold: n_proxy must be >= 1");
  std::vector<SampleRecord> samples = sample_dataset(env, ref_policy, n_proxy, stream);
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (const SampleRecord& r : samples) scores.push_back(score_sample(model, r.reward, stream));
  return estimate_threshold(std::move(scores), p, method);
}

}  // namespace tgo
