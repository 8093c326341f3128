#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "tgo/feedback.hpp"

using namespace tgo;

TEST_CASE("score_sample with zero noise applies the transform exactly") {
  RngStream stream(1);
  ScoreModel identity;
  CHECK(score_sample(identity, 1.7, stream) == 1.7);

  ScoreModel affine;
  affine.transform = ScoreTransform::affine(2.0, 1.0);
  CHECK(score_sample(affine, 3.0, stream) == 7.0);
}

TEST_CASE("zero-noise scores are strictly monotone in reward for all transforms") {
  RngStream stream(2);
  for (ScoreTransform t : {ScoreTransform::identity(), ScoreTransform::affine(0.5, -3.0),
                           ScoreTransform::logistic_squash()}) {
    ScoreModel model;
    model.transform = t;
    double prev = score_sample(model, -5.0, stream);
    for (double r = -4.5; r <= 5.0; r += 0.5) {
      double s = score_sample(model, r, stream);
      CHECK(s > prev);
      prev = s;
    }
  }
}

TEST_CASE("estimate_threshold on small hand samples") {
  Threshold odd_nr = estimate_threshold({1, 2, 3, 4, 5}, 0.5, QuantileMethod::nearest_rank);
  Threshold odd_li =
      estimate_threshold({1, 2, 3, 4, 5}, 0.5, QuantileMethod::linear_interpolation);
  CHECK(odd_nr.value == 3.0);
  CHECK(odd_li.value == 3.0);

  Threshold mid = estimate_threshold({1, 2, 3, 4}, 0.5, QuantileMethod::linear_interpolation);
  CHECK(mid.value == 2.5);

  Threshold flat = estimate_threshold({9, 9, 9, 9}, 0.25);
  CHECK(flat.value == 9.0);
  CHECK(flat.quantile_std_error == 0.0);
}

TEST_CASE("estimate_threshold rejects bad input") {
  CHECK_THROWS_AS(estimate_threshold({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(estimate_threshold({1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_threshold({1.0}, 1.0), std::invalid_argument);
}

TEST_CASE("nearest_rank returns an element of the sample within its range") {
  RngStream stream(3);
  std::vector<double> scores(101);
  for (double& s : scores) s = stream.normal();
  for (double p : {0.1, 0.37, 0.5, 0.9}) {
    Threshold t = estimate_threshold(scores, p, QuantileMethod::nearest_rank);
    CHECK(std::count(scores.begin(), scores.end(), t.value) > 0);
    CHECK(t.value >= *std::min_element(scores.begin(), scores.end()));
    CHECK(t.value <= *std::max_element(scores.begin(), scores.end()));
    CHECK(t.sample_count == scores.size());
    CHECK(t.percentile == p);
  }
}

TEST_CASE("pseudo_label is inclusive at the threshold") {
  Threshold tau;
  tau.value = 2.0;
  CHECK(pseudo_label(2.0, tau) == 1);
  CHECK(pseudo_label(2.1, tau) == 1);
  CHECK(pseudo_label(1.9, tau) == 0);
}

TEST_CASE("median nearest-rank threshold labels at least half positive") {
  RngStream stream(4);
  std::vector<double> scores(201);
  for (double& s : scores) s = stream.normal();
  Threshold tau = estimate_threshold(scores, 0.5, QuantileMethod::nearest_rank);
  std::size_t positives = 0;
  for (double s : scores) positives += pseudo_label(s, tau);
  CHECK(positives * 2 >= scores.size());
}

TEST_CASE("higher percentiles label strictly fewer samples positive") {
  RngStream stream(12);
  std::vector<double> scores(500);
  for (double& s : scores) s = stream.normal();
  Threshold lo = estimate_threshold(scores, 0.1);
  Threshold hi = estimate_threshold(scores, 0.9);
  std::size_t pos_lo = 0, pos_hi = 0;
  for (double s : scores) {
    pos_lo += pseudo_label(s, lo);
    pos_hi += pseudo_label(s, hi);
  }
  CHECK(pos_hi < pos_lo);
}

TEST_CASE("confidence_weight formula") {
  Threshold tau;
  tau.value = 1.0;
  CHECK(confidence_weight(1.2, tau, 5.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(confidence_weight(123.0, tau, 0.0) == 1.0);
  CHECK(confidence_weight(1.3, tau, 2.0) == confidence_weight(0.7, tau, 2.0));
  CHECK(confidence_weight(1.0, tau, 7.0) == 1.0);
}

TEST_CASE("pseudo-labels are invariant under joint monotone transforms") {
  RngStream stream(5);
  std::vector<double> scores(100);
  for (double& s : scores) s = stream.normal();
  Threshold tau = estimate_threshold(scores, 0.4);

  auto g = [](double v) { return std::exp(0.5 * v) + 3.0; };  // strictly increasing
  Threshold tau_g;
  tau_g.value = g(tau.value);
  for (double s : scores) CHECK(pseudo_label(s, tau) == pseudo_label(g(s), tau_g));
}

TEST_CASE("confidence weights are invariant under a joint additive shift") {
  Threshold tau;
  tau.value = 0.3;
  Threshold shifted;
  shifted.value = tau.value + 11.0;
  for (double s : {-2.0, 0.0, 0.3, 1.7})
    CHECK(confidence_weight(s, tau, 5.0) ==
          doctest::Approx(confidence_weight(s + 11.0, shifted, 5.0)).epsilon(1e-12));
}

namespace {

// Environment whose prompts all share one reward and reference row, so the
// oracle baseline tau*(x) is the same for every prompt.
TabularEnv constant_baseline_env() {
  TabularEnv seed_env = make_tabular(99, 1, 5, RewardSpec::bimodal());
  TabularEnv env;
  env.num_prompts = 2;
  env.num_outcomes = 5;
  env.rewards = Matrix(2, 5);
  env.ref_logits = Matrix(2, 5);
  env.prompt_weights = {0.5, 0.5};
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 5; ++y) {
      env.rewards(x, y) = seed_env.rewards(0, y);
      env.ref_logits(x, y) = seed_env.ref_logits(0, y);
    }
  env.validate();
  return env;
}

}  // namespace

TEST_CASE("calibration error vanishes when the threshold is the oracle baseline") {
  TabularEnv env = constant_baseline_env();
  TabularPolicy ref = env.reference_policy();
  RngStream stream(6);
  std::vector<SampleRecord> samples = sample_dataset(env, ref, 1000, stream);
  ScoreModel noiseless;
  ScoredDataset scored = score_dataset(samples, noiseless, stream);

  Threshold tau;
  tau.value = oracle_baseline(ref, env, 1.0, 0);
  CHECK(calibration_error(scored, env, 1.0, tau) == 0.0);
}

TEST_CASE("calibration error equals a brute-force recount") {
  TabularEnv env = make_tabular(23, 3, 4, RewardSpec::bimodal());
  TabularPolicy ref = env.reference_policy();
  RngStream stream(7);
  std::vector<SampleRecord> samples = sample_dataset(env, ref, 400, stream);
  ScoreModel model;
  model.noise_scale = 0.5;
  ScoredDataset scored = score_dataset(samples, model, stream);
  Threshold tau;
  tau.value = 0.2;

  std::size_t disagreements = 0;
  for (const ScoredRecord& r : scored.records) {
    int l = r.score >= tau.value ? 1 : 0;
    double tau_star = oracle_baseline(ref, env, 1.0, r.prompt_id);
    int l_star = env.rewards(r.prompt_id, r.outcome) >= tau_star ? 1 : 0;
    disagreements += (l != l_star);
  }
  double expected = static_cast<double>(disagreements) / scored.records.size();
  CHECK(calibration_error(scored, env, 1.0, tau) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("calibration error rejects an empty dataset") {
  TabularEnv env = make_tabular(23, 3, 4, RewardSpec::bimodal());
  Threshold tau;
  CHECK_THROWS_AS(calibration_error(ScoredDataset{}, env, 1.0, tau), std::invalid_argument);
}

TEST_CASE("proxy threshold on a constant-reward env is the constant score") {
  TabularEnv env = make_tabular(31, 2, 3, RewardSpec::constant(1.5));
  TabularPolicy ref = env.reference_policy();
  ScoreModel noiseless;
  for (std::size_t n : {5, 50, 500}) {
    RngStream stream(n);
    Threshold t = proxy_threshold(ref, env, noiseless, n, 0.5, stream);
    CHECK(t.value == 1.5);
  }
}

TEST_CASE("proxy threshold converges to the full-data threshold") {
  TabularEnv env = make_tabular(32, 4, 6, RewardSpec::bimodal());
  TabularPolicy ref = env.reference_policy();
  ScoreModel model;
  model.noise_scale = 0.1;

  RngStream full_stream(100);
  Threshold full = proxy_threshold(ref, env, model, 200000, 0.5, full_stream);

  double prev_gap = 1e300;
  for (std::size_t n : {100, 1000, 10000}) {
    // Average the gap over a few replicates so the check is not one lucky draw.
    double gap = 0.0;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
      RngStream stream = RngStream::derive(200 + n, rep);
      gap += std::abs(proxy_threshold(ref, env, model, n, 0.5, stream).value - full.value);
    }
    gap /= 10.0;
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("independent proxy thresholds agree within three standard errors") {
  TabularEnv env = make_tabular(33, 4, 6, RewardSpec::bimodal());
  TabularPolicy ref = env.reference_policy();
  ScoreModel model;
  model.noise_scale = 0.1;
  RngStream a(41), b(42);
  Threshold ta = proxy_threshold(ref, env, model, 10000, 0.5, a);
  Threshold tb = proxy_threshold(ref, env, model, 10000, 0.5, b);
  double se = std::max(ta.quantile_std_error, tb.quantile_std_error);
  CHECK(se > 0.0);
  CHECK(std::abs(ta.value - tb.value) <= 3.0 * se);
}
