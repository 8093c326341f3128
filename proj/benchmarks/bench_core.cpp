#include <benchmark/benchmark.h>

#include "tgo/analysis.hpp"

namespace {

using namespace tgo;

const TabularEnv& bench_env() {
  static TabularEnv env = make_tabular(1000, 4, 6, RewardSpec::bimodal());
  return env;
}

void BM_tgo_loss(benchmark::State& state) {
  const TabularEnv& env = bench_env();
  TabularPolicy ref = env.reference_policy();
  RngStream stream(7);
  std::vector<SampleRecord> samples = sample_dataset(env, ref, 4096, stream);
  ScoreModel model;
  ScoredDataset scored = score_dataset(samples, model, stream);
  std::vector<BatchItem> batch;
  for (const ScoredRecord& r : scored.records)
    batch.push_back({r.prompt_id, r.outcome, r.score});
  Threshold tau;
  tau.value = 0.0;
  TGOConfig config;
  for (auto _ : state) {
    LossBreakdown lb = tgo_loss(ref, ref, batch, tau, config);
    benchmark::DoNotOptimize(lb.total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_tgo_loss);

void BM_optimal_policy(benchmark::State& state) {
  const TabularEnv& env = bench_env();
  TabularPolicy ref = env.reference_policy();
  for (auto _ : state) {
    TabularPolicy opt = optimal_policy(ref, env, 1.0);
    benchmark::DoNotOptimize(opt.logits.data().data());
  }
}
BENCHMARK(BM_optimal_policy);

void BM_estimate_threshold(benchmark::State& state) {
  RngStream stream(11);
  std::vector<double> scores(100000);
  for (double& s : scores) s = stream.normal();
  for (auto _ : state) {
    Threshold t = estimate_threshold(scores, 0.5);
    benchmark::DoNotOptimize(t.value);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(scores.size()));
}
BENCHMARK(BM_estimate_threshold);

void BM_train_epoch(benchmark::State& state) {
  const TabularEnv& env = bench_env();
  ScoreModel model;
  TrainConfig config;
  config.epochs = 1;
  config.seed = 3;
  for (auto _ : state) {
    TrainReport report = run_offline(env, env.reference_policy(), model, 2000, config);
    benchmark::DoNotOptimize(report.loss_curve.back());
  }
}
BENCHMARK(BM_train_epoch);

}  // namespace

BENCHMARK_MAIN();
