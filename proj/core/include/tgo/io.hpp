#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tgo/env.hpp"
#include "tgo/feedback.hpp"
#include "tgo/trainer.hpp"

namespace tgo {

/// Flat `key = value` text format. Matrices are comma-separated rows joined
/// by `;`. Doubles are written with max_digits10 so round trips are exact.

std::string format_double(double v);
std::string matrix_to_string(const Matrix& m);
Matrix matrix_from_string(const std::string& s);

using FlatMap = std::map<std::string, std::string>;

std::string flat_to_string(const FlatMap& kv);
FlatMap flat_from_string(const std::string& text);  // '#' comments, blank lines ok
FlatMap flat_from_file(const std::string& path);

std::string env_to_string(const TabularEnv& env);
TabularEnv env_from_string(const std::string& text);

std::string policy_to_string(const TabularPolicy& policy);
TabularPolicy policy_from_string(const std::string& text);

/// Writes via a temp file in the same directory followed by a rename.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Minimal strict CSV: fixed column count, header row always present.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
  static CsvTable from_string(const std::string& text);  // throws on ragged rows
};

std::string scored_dataset_to_csv(const ScoredDataset& dataset);
ScoredDataset scored_dataset_from_csv(const std::string& text);

std::string threshold_to_string(const Threshold& t);
Threshold threshold_from_string(const std::string& text);

/// 64-bit FNV-1a, used for environment-file fingerprints in run manifests.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace tgo
