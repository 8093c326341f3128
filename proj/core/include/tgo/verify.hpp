#pragma once

#include <string>
#include <vector>

#include "tgo/env.hpp"

namespace tgo {

enum class VerifyLevel { fast, full };

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  double value = 0.0;      // headline statistic of the check
  std::string detail;
  double seconds = 0.0;
};

/// Runs the whole property suite. The fast level skips the bias-rate
/// experiment (reported as skipped, never as passed). `threads` = 0 means
/// use machine parallelism capped by TGO_LAB_THREADS.
std::vector<CheckResult> run_verification(VerifyLevel level, unsigned threads = 0);

/// Effective internal parallelism: min(requested or hardware, TGO_LAB_THREADS).
unsigned effective_threads(unsigned requested = 0);

/// Reference bimodal environments used by the training-efficacy and
/// sensitivity checks: make_tabular(1000 + i, 4, 6, bimodal).
std::vector<TabularEnv> reference_bimodal_suite(std::size_t count = 10);

/// Fixed reference environment for the consistency and bias experiments:
/// three prompts, two outcomes, uniform reference policy, bimodal rewards.
/// Balanced cell probabilities keep small-n empirical fits away from the
/// simplex boundary, where the M-estimation expansions stop applying.
TabularEnv reference_bimodal_env();

}  // namespace tgo
