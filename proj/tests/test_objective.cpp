#include <cmath>

#include "doctest.h"
#include "tgo/env.hpp"
#include "tgo/objective.hpp"

using namespace tgo;

namespace {

TabularEnv small_env() { return make_tabular(50, 2, 3, RewardSpec::uniform_random()); }

Threshold at(double value) {
  Threshold t;
  t.value = value;
  return t;
}

}  // namespace

TEST_CASE("implicit_policy_score") {
  CHECK(implicit_policy_score(-1.2, -1.2, 3.0) == 0.0);
  CHECK(implicit_policy_score(-1.0, -1.3, 1.0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(implicit_policy_score(-1.0, -1.3, 10.0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("tgo_loss anchors at ln 2 when theta = ref and s = tau") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TGOConfig config;
  LossBreakdown lb = tgo_loss(ref, ref, {{0, 1, 0.7}}, at(0.7), config);
  CHECK(lb.per_sample[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(lb.implicit_scores[0] == 0.0);

  // Batch mean of identical anchors is still ln 2, independent of B.
  std::vector<BatchItem> batch(17, BatchItem{0, 1, 0.7});
  LossBreakdown many = tgo_loss(ref, ref, batch, at(0.7), config);
  CHECK(many.total == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("tgo per-sample loss in the saturated regimes") {
  SampleLoss right = tgo_sample_loss(20.0, 1, 1.0, NumericMode::exact_logsigmoid, 1e-12);
  CHECK(right.value < 1e-8);
  SampleLoss wrong = tgo_sample_loss(20.0, 0, 1.5, NumericMode::exact_logsigmoid, 1e-12);
  CHECK(wrong.value == doctest::Approx(1.5 * softplus(20.0)).epsilon(1e-12));
  CHECK(wrong.value == doctest::Approx(1.5 * 20.0).epsilon(1e-6));
}

TEST_CASE("tgo_loss rejects an empty batch") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TGOConfig config;
  CHECK_THROWS_AS(tgo_loss(ref, ref, {}, at(0.0), config), std::invalid_argument);
}

TEST_CASE("tgo gradient matches finite differences") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TabularPolicy theta = ref;
  theta.logits(0, 0) += 0.4;
  theta.logits(1, 2) -= 0.3;
  std::vector<BatchItem> batch = {{0, 0, 0.9}, {0, 2, -0.4}, {1, 1, 0.1}, {1, 2, 0.6}};
  for (NumericMode mode : {NumericMode::exact_logsigmoid, NumericMode::clipped_sigmoid}) {
    TGOConfig config;
    config.numeric_mode = mode;
    CHECK(tgo_gradient_check(theta, ref, batch, at(0.2), config, 1e-6) <= 1e-5);
  }
}

TEST_CASE("gradient is exactly zero for prompts absent from the batch") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TGOConfig config;
  LossBreakdown lb = tgo_loss(ref, ref, {{0, 1, 0.5}}, at(0.0), config);
  for (std::size_t y = 0; y < 3; ++y) CHECK(lb.gradient(1, y) == 0.0);
}

TEST_CASE("saturated correctly-labeled batches have vanishing gradients") {
  TabularPolicy ref(Matrix(1, 2));
  TabularPolicy theta = ref;
  theta.logits(0, 0) = 40.0;  // implicit score ~ +40 for outcome 0, ~ -40 for 1
  TGOConfig config;
  config.c = 0.0;
  std::vector<BatchItem> batch = {{0, 0, 1.0}, {0, 1, -1.0}};
  LossBreakdown lb = tgo_loss(theta, ref, batch, at(0.0), config);
  CHECK(lb.gradient.frobenius_norm() < 1e-8);
}

TEST_CASE("one descent step moves the pseudo-labeled sample the right way") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TGOConfig config;
  for (int label : {0, 1}) {
    double score = label ? 0.5 : -0.5;
    LossBreakdown lb = tgo_loss(ref, ref, {{0, 1, score}}, at(0.0), config);
    TabularPolicy stepped = ref;
    for (std::size_t i = 0; i < stepped.logits.data().size(); ++i)
      stepped.logits.data()[i] -= 0.01 * lb.gradient.data()[i];
    double before = log_prob(ref, 0, 1);
    double after = log_prob(stepped, 0, 1);
    if (label)
      CHECK(after > before);
    else
      CHECK(after < before);
  }
}

TEST_CASE("per-sample loss scales linearly in the confidence weight") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TabularPolicy theta = ref;
  theta.logits(0, 1) += 0.6;
  double base = 0.0;
  for (double c : {0.0, 1.0, 5.0, 20.0}) {
    TGOConfig config;
    config.c = c;
    double v = tgo_loss(theta, ref, {{0, 1, 0.8}}, at(0.5), config).per_sample[0];
    if (c == 0.0)
      base = v;
    else
      CHECK(v == doctest::Approx(base * (1.0 + c * 0.3)).epsilon(1e-12));
  }
}

TEST_CASE("numeric modes agree in the moderate regime and exact mode never overflows") {
  for (int label : {0, 1})
    for (double s = -20.0; s <= 20.0; s += 0.5) {
      double exact = tgo_sample_loss(s, label, 1.0, NumericMode::exact_logsigmoid, 1e-12).value;
      double clipped = tgo_sample_loss(s, label, 1.0, NumericMode::clipped_sigmoid, 1e-12).value;
      CHECK(std::abs(exact - clipped) <= 1e-9);
    }
  CHECK(std::isfinite(tgo_sample_loss(700.0, 0, 1.0, NumericMode::exact_logsigmoid, 1e-12).value));
  CHECK(std::isfinite(tgo_sample_loss(-700.0, 1, 1.0, NumericMode::exact_logsigmoid, 1e-12).value));
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  TabularPolicy theta = ref;
  theta.logits(0, 2) += 0.5;
  TGOConfig config;
  std::vector<BatchItem> batch = {{0, 0, 0.4}, {1, 1, -0.2}, {0, 2, 0.9}};
  LossBreakdown whole = tgo_loss(theta, ref, batch, at(0.1), config);
  Matrix mean(2, 3);
  for (const BatchItem& item : batch) {
    LossBreakdown single = tgo_loss(theta, ref, {item}, at(0.1), config);
    for (std::size_t i = 0; i < mean.data().size(); ++i)
      mean.data()[i] += single.gradient.data()[i] / batch.size();
  }
  for (std::size_t i = 0; i < mean.data().size(); ++i)
    CHECK(whole.gradient.data()[i] == doctest::Approx(mean.data()[i]).epsilon(1e-12));
}

TEST_CASE("dpo loss at theta = ref is ln 2 and is antisymmetric in the pair") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  CHECK(dpo_loss(ref, ref, {{0, 1, 2}}, 1.0).total ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  TabularPolicy theta = ref;
  theta.logits(0, 1) += 0.8;
  double forward = dpo_loss(theta, ref, {{0, 1, 2}}, 1.0).per_sample[0];
  double swapped = dpo_loss(theta, ref, {{0, 2, 1}}, 1.0).per_sample[0];
  // Swapping winner and loser flips the margin z -> -z inside the sigmoid.
  double margin = log_prob(theta, 0, 1) - log_prob(ref, 0, 1) -
                  (log_prob(theta, 0, 2) - log_prob(ref, 0, 2));
  CHECK(forward == doctest::Approx(softplus(-margin)).epsilon(1e-12));
  CHECK(swapped == doctest::Approx(softplus(margin)).epsilon(1e-12));
}

TEST_CASE("dpo margin from the optimal policy reproduces reward differences") {
  TabularEnv env = make_tabular(51, 3, 5, RewardSpec::uniform_random());
  TabularPolicy ref = env.reference_policy();
  double beta = 1.3;
  TabularPolicy opt = optimal_policy(ref, env, beta);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t yw = 0; yw < 5; ++yw)
      for (std::size_t yl = 0; yl < 5; ++yl) {
        if (yw == yl) continue;
        double margin = beta * ((log_prob(opt, x, yw) - log_prob(ref, x, yw)) -
                                (log_prob(opt, x, yl) - log_prob(ref, x, yl)));
        CHECK(std::abs(margin - (env.rewards(x, yw) - env.rewards(x, yl))) < 1e-10);
      }
}

TEST_CASE("dpo rejects degenerate pairs") {
  TabularEnv env = small_env();
  TabularPolicy ref = env.reference_policy();
  CHECK_THROWS_AS(dpo_loss(ref, ref, {{0, 1, 1}}, 1.0), std::invalid_argument);
}

TEST_CASE("sft loss basics") {
  TabularPolicy uniform = uniform_policy(1, 5);
  CHECK(sft_loss(uniform, {{0, 2}}).total == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK_THROWS_AS(sft_loss(uniform, {}), std::invalid_argument);

  // Descent on a single positive drives its likelihood toward 1.
  TabularPolicy theta = uniform_policy(1, 3);
  for (int step = 0; step < 4000; ++step) {
    LossBreakdown lb = sft_loss(theta, {{0, 1}});
    for (std::size_t i = 0; i < theta.logits.data().size(); ++i)
      theta.logits.data()[i] -= 0.5 * lb.gradient.data()[i];
  }
  CHECK(sft_loss(theta, {{0, 1}}).total < 1e-2);
}

TEST_CASE("gaussian surrogate tgo loss matches a finite-difference gradient") {
  std::vector<double> prediction = {0.4, -0.2};
  std::vector<double> ref_prediction = {0.0, 0.0};
  std::vector<double> outcome = {0.3, 0.1};
  TGOConfig config;
  Threshold tau = at(0.05);
  SurrogateResult res =
      tgo_loss_gaussian(prediction, ref_prediction, outcome, 0.01, 0.2, tau, config);
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    std::vector<double> up = prediction, down = prediction;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    double fd = (tgo_loss_gaussian(up, ref_prediction, outcome, 0.01, 0.2, tau, config).loss -
                 tgo_loss_gaussian(down, ref_prediction, outcome, 0.01, 0.2, tau, config).loss) /
                2e-6;
    CHECK(res.gradient[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("masked surrogate tgo loss only moves masked positions") {
  Matrix logits(3, 4), ref_logits(3, 4);
  logits(0, 1) = 0.3;
  logits(2, 2) = -0.4;
  std::vector<std::size_t> tokens = {1, 0, 2};
  std::vector<std::size_t> mask = {0, 2};
  TGOConfig config;
  Threshold tau = at(0.1);
  MaskedSurrogateResult res =
      tgo_loss_masked(logits, ref_logits, tokens, mask, 0.5, tau, config);
  for (std::size_t v = 0; v < 4; ++v) CHECK(res.gradient(1, v) == 0.0);

  // Finite differences over a masked row.
  for (std::size_t v = 0; v < 4; ++v) {
    Matrix up = logits, down = logits;
    up(0, v) += 1e-6;
    down(0, v) -= 1e-6;
    double fd = (tgo_loss_masked(up, ref_logits, tokens, mask, 0.5, tau, config).loss -
                 tgo_loss_masked(down, ref_logits, tokens, mask, 0.5, tau, config).loss) /
                2e-6;
    CHECK(res.gradient(0, v) == doctest::Approx(fd).epsilon(1e-4));
  }
}
