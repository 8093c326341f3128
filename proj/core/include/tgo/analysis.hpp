#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgo/trainer.hpp"

namespace tgo {

/// Aggregated form of the TGO loss on a finite environment: one cell per
/// (prompt, outcome). Because the per-sample loss depends on theta only
/// through the cell's implicit score, a dataset enters the loss through two
/// numbers per cell: the total confidence-weighted mass of pseudo-positive
/// samples and of pseudo-negative samples. The population problem fills
/// these with exact expectations (Gaussian truncated moments when the score
/// model is noisy); an empirical fit fills them with per-sample sums / n.
/// The threshold stays fixed at its population value in both, so both
/// problems minimize the same loss family.
struct CellProblem {
  std::size_t num_prompts = 0;
  std::size_t num_outcomes = 0;
  Matrix pos_weight;  // sum (or expectation) of w(s, tau) over label-1 samples
  Matrix neg_weight;  // same over label-0 samples
  Matrix ref_logits;
  double beta = 1.0;
  NumericMode numeric_mode = NumericMode::exact_logsigmoid;
  double clip_eps = 1e-12;

  // Second moments E[w^2; label] per cell. Filled by population_problem only;
  // needed for the per-sample score covariance, not for the loss itself.
  Matrix pos_sq;
  Matrix neg_sq;
};

/// Weighted TGO loss over all cells; gradient optional.
double cell_loss(const CellProblem& problem, const TabularPolicy& policy, Matrix* gradient);

struct FitResult {
  TabularPolicy policy;
  bool converged = false;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
};

/// Full-batch descent (Barzilai-Borwein steps with a backtracking safeguard)
/// to the requested gradient norm.
FitResult minimize_cells(const CellProblem& problem, const TabularPolicy& init,
                         double grad_tol = 1e-9, std::size_t max_iterations = 200000);

/// Exact population TGO problem. Cell mass is prompt_weight * pi_ref, split
/// across the two pseudo-labels with closed-form truncated-Gaussian moments
/// of the confidence weight; the threshold is the exact population
/// p-quantile of the score mixture. Throws for noise without a closed form
/// (anything non-Gaussian).
CellProblem population_problem(const TabularEnv& env, const TabularPolicy& ref,
                               const ScoreModel& score_model, const TGOConfig& config);

/// Population minimizer theta*. Reports (but does not hide) non-convergence.
FitResult population_minimizer(const TabularEnv& env, const TabularPolicy& ref,
                               const ScoreModel& score_model, const TGOConfig& config);

/// Per-row mean-centered copy of the logits: the gauge in which softmax
/// parameters are identified.
Matrix gauge_fixed(const Matrix& logits);

struct ConsistencyReport {
  std::vector<std::size_t> sample_sizes;
  std::vector<double> mean_param_error;
  double loglog_slope = 0.0;
  std::size_t replicates = 0;
  std::size_t failed_fits = 0;
};

ConsistencyReport consistency_experiment(const TabularEnv& env, const TGOConfig& config,
                                         const std::vector<std::size_t>& sample_sizes,
                                         std::size_t replicates, std::uint64_t seed,
                                         unsigned threads = 0);

struct BiasReport {
  std::vector<std::size_t> sample_sizes;
  std::vector<std::vector<double>> mean_signed_error;  // gauge-fixed, flattened
  double fitted_slope = 0.0;
  Matrix hessian_at_opt;       // reduced (gauge-free) coordinates
  Matrix score_covariance;     // reduced coordinates
  double third_moment_tensor_norm = 0.0;
  bool hessian_positive_definite = false;
  double hessian_condition_number = 0.0;
  bool ill_conditioned = false;
  bool degenerate_labels = false;  // single-label environment, expansion inapplicable
  std::size_t replicates = 0;
  std::size_t failed_fits = 0;
};

BiasReport bias_experiment(const TabularEnv& env, const TGOConfig& config,
                           const std::vector<std::size_t>& sample_sizes, std::size_t replicates,
                           std::uint64_t seed, unsigned threads = 0);

struct SensitivityRow {
  double percentile = 0.0;
  std::size_t replicate = 0;
  double mean_reward = 0.0;
  double kl_to_optimal = 0.0;
  double calibration_error = 0.0;
};

struct SensitivityGrid {
  std::vector<double> percentiles;
  std::vector<SensitivityRow> rows;  // one per (percentile, replicate)
};

/// Full training run per percentile per replicate (Table-style sweep).
SensitivityGrid threshold_sensitivity(const TabularEnv& env, const TrainConfig& config,
                                      const ScoreModel& score_model, std::size_t n_samples,
                                      const std::vector<double>& percentiles,
                                      std::size_t replicates, std::uint64_t seed,
                                      unsigned threads = 0);

struct DistributionSummary {
  double mean_before = 0.0, mean_after = 0.0;
  double median_before = 0.0, median_after = 0.0;
  std::vector<double> deciles_before, deciles_after, decile_shift;
};

DistributionSummary distribution_summary(const TabularEnv& env, const TabularPolicy& before,
                                         const TabularPolicy& after);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Exact population Hessian of the cell loss at theta, in reduced
/// (per-row zero-mean) coordinates. Block diagonal across prompts.
Matrix population_hessian_reduced(const CellProblem& problem, const TabularPolicy& theta);

/// Exact covariance of the per-sample gradient at theta, reduced coordinates.
Matrix population_score_covariance_reduced(const CellProblem& problem,
                                           const TabularPolicy& theta);

}  // namespace tgo
