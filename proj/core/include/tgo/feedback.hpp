#pragma once

#include <string>
#include <vector>

#include "tgo/env.hpp"

namespace tgo {

enum class TransformKind { identity, affine, logistic_squash };

/// Strictly increasing map from latent reward to observed score.
struct ScoreTransform {
  TransformKind kind = TransformKind::identity;
  double a = 1.0;  // affine slope, must be > 0
  double b = 0.0;  // affine intercept

  double apply(double reward) const;

  static ScoreTransform identity() { return {TransformKind::identity, 1.0, 0.0}; }
  static ScoreTransform affine(double a, double b) { return {TransformKind::affine, a, b}; }
  static ScoreTransform logistic_squash() { return {TransformKind::logistic_squash, 1.0, 0.0}; }
};

enum class NoiseKind { gaussian, bounded_uniform };

/// Observation model s = g(R) + xi. Gaussian noise is the default
/// sub-Gaussian instance; bounded uniform exists for worst-case tests.
struct ScoreModel {
  ScoreTransform transform;
  double noise_scale = 0.0;
  NoiseKind noise = NoiseKind::gaussian;

  void validate() const;
};

double score_sample(const ScoreModel& model, double reward, RngStream& stream);

struct ScoredRecord {
  std::size_t prompt_id = 0;
  std::size_t outcome = 0;
  double score = 0.0;
};

struct ScoredDataset {
  std::vector<ScoredRecord> records;
  std::string source_policy_tag;
};

/// Score every record of a sampled dataset under one model.
ScoredDataset score_dataset(const std::vector<SampleRecord>& samples, const ScoreModel& model,
                            RngStream& stream, std::string source_tag = {});

enum class QuantileMethod { nearest_rank, linear_interpolation };

struct Threshold {
  double value = 0.0;
  double percentile = 0.5;
  QuantileMethod method = QuantileMethod::linear_interpolation;
  std::size_t sample_count = 0;
  /// Asymptotic standard error of the quantile, from the order-statistic
  /// spacing density proxy. Zero when the sample is degenerate.
  double quantile_std_error = 0.0;
};

/// Empirical p-quantile of the scores. nearest_rank returns an element of
/// the sample; linear_interpolation interpolates adjacent order statistics
/// at rank (n-1)p.
Threshold estimate_threshold(std::vector<double> scores, double p,
                             QuantileMethod method = QuantileMethod::linear_interpolation);

/// 1[s >= tau], ties labeled positive.
inline int pseudo_label(double score, const Threshold& threshold) {
  return score >= threshold.value ? 1 : 0;
}

/// w(s, tau) = 1 + c * |s - tau|.
inline double confidence_weight(double score, const Threshold& threshold, double c) {
  return 1.0 + c * std::abs(score - threshold.value);
}

/// Fraction of records whose pseudo-label disagrees with the oracle label
/// 1[R >= tau*(x)] computed from the environment's exact baseline.
double calibration_error(const ScoredDataset& dataset, const TabularEnv& env, double beta,
                         const Threshold& threshold);

/// Threshold from a fresh proxy set sampled from the reference policy.
Threshold proxy_threshold(const TabularPolicy& ref_policy, const TabularEnv& env,
                          const ScoreModel& model, std::size_t n_proxy, double p,
                          RngStream& stream,
                          QuantileMethod method = QuantileMethod::linear_interpolation);

}  // namespace tgo
