#include "tgo/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tgo {

std::string format_double(double v) {
  // Shortest string that round-trips; "0.3" stays "0.3" instead of the
  // 17-digit expansion.
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    check(pos == s.size(), "parse error: trailing characters in number '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("parse error: not a number: '" + s + "'");
  }
}

std::size_t parse_size(const std::string& s) {
  double v = parse_double(s);
  check(v >= 0 && v == std::floor(v), "parse error: expected nonnegative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

const std::string& require(const FlatMap& kv, const std::string& key) {
  auto it = kv.find(key);
  check(it != kv.end(), "missing key: " + key);
  return it->second;
}

}  // namespace

std::string matrix_to_string(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i) out += ';';
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
  }
  return out;
}

Matrix matrix_from_string(const std::string& s) {
  std::vector<std::string> rows = split(s, ';');
  check(!rows.empty(), "matrix parse: empty text");
  std::vector<std::vector<double>> values;
  for (const std::string& row : rows) {
    std::vector<std::string> cells = split(row, ',');
    std::vector<double> parsed;
    for (const std::string& c : cells) parsed.push_back(parse_double(trim(c)));
    if (!values.empty())
      check(parsed.size() == values.front().size(), "matrix parse: ragged rows");
    values.push_back(std::move(parsed));
  }
  Matrix m(values.size(), values.front().size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = values[i][j];
  return m;
}

std::string flat_to_string(const FlatMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

FlatMap flat_from_string(const std::string& text) {
  FlatMap kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    check(eq != std::string::npos,
          "flat parse: missing '=' on line " + std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    check(!key.empty(), "flat parse: empty key on line " + std::to_string(line_no));
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

FlatMap flat_from_file(const std::string& path) { return flat_from_string(read_file(path)); }

std::string env_to_string(const TabularEnv& env) {
  FlatMap kv;
  kv["format"] = "tabular_env";
  kv["num_prompts"] = std::to_string(env.num_prompts);
  kv["num_outcomes"] = std::to_string(env.num_outcomes);
  kv["rewards"] = matrix_to_string(env.rewards);
  kv["ref_logits"] = matrix_to_string(env.ref_logits);
  std::string weights;
  for (std::size_t i = 0; i < env.prompt_weights.size(); ++i) {
    if (i) weights += ',';
    weights += format_double(env.prompt_weights[i]);
  }
  kv["prompt_weights"] = weights;
  return flat_to_string(kv);
}

TabularEnv env_from_string(const std::string& text) {
  FlatMap kv = flat_from_string(text);
  check(require(kv, "format") == "tabular_env", "env parse: wrong format tag");
  TabularEnv env;
  env.num_prompts = parse_size(require(kv, "num_prompts"));
  env.num_outcomes = parse_size(require(kv, "num_outcomes"));
  env.rewards = matrix_from_string(require(kv, "rewards"));
  env.ref_logits = matrix_from_string(require(kv, "ref_logits"));
  for (const std::string& w : split(require(kv, "prompt_weights"), ','))
    env.prompt_weights.push_back(parse_double(trim(w)));
  env.validate();
  return env;
}

std::string policy_to_string(const TabularPolicy& policy) {
  FlatMap kv;
  kv["format"] = "tabular_policy";
  kv["logits"] = matrix_to_string(policy.logits);
  return flat_to_string(kv);
}

TabularPolicy policy_from_string(const std::string& text) {
  FlatMap kv = flat_from_string(text);
  check(require(kv, "format") == "tabular_policy", "policy parse: wrong format tag");
  TabularPolicy p(matrix_from_string(require(kv, "logits")));
  p.validate();
  return p;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string CsvTable::to_string() const {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  };
  append_row(header);
  for (const auto& row : rows) append_row(row);
  return out;
}

CsvTable CsvTable::from_string(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> cells = split(line, ',');
    if (first) {
      check(!cells.empty() && !cells.front().empty(), "csv parse: missing header");
      table.header = std::move(cells);
      first = false;
    } else {
      check(cells.size() == table.header.size(), "csv parse: ragged row");
      table.rows.push_back(std::move(cells));
    }
  }
  check(!first, "csv parse: empty input");
  return table;
}

std::string scored_dataset_to_csv(const ScoredDataset& dataset) {
  CsvTable table;
  table.header = {"prompt_id", "outcome", "score"};
  for (const ScoredRecord& r : dataset.records)
    table.rows.push_back(
        {std::to_string(r.prompt_id), std::to_string(r.outcome), format_double(r.score)});
  return table.to_string();
}

ScoredDataset scored_dataset_from_csv(const std::string& text) {
  CsvTable table = CsvTable::from_string(text);
  check(table.header == std::vector<std::string>({"prompt_id", "outcome", "score"}),
        "scored dataset csv: unexpected header");
  ScoredDataset out;
  for (const auto& row : table.rows)
    out.records.push_back({parse_size(row[0]), parse_size(row[1]), parse_double(row[2])});
  return out;
}

std::string threshold_to_string(const Threshold& t) {
  FlatMap kv;
  kv["format"] = "threshold";
  kv["value"] = format_double(t.value);
  kv["percentile"] = format_double(t.percentile);
  kv["method"] =
      t.method == QuantileMethod::nearest_rank ? "nearest_rank" : "linear_interpolation";
  kv["sample_count"] = std::to_string(t.sample_count);
  kv["quantile_std_error"] = format_double(t.quantile_std_error);
  return flat_to_string(kv);
}

Threshold threshold_from_string(const std::string& text) {
  FlatMap kv = flat_from_string(text);
  check(require(kv, "format") == "threshold", "threshold parse: wrong format tag");
  Threshold t;
  t.value = parse_double(require(kv, "value"));
  t.percentile = parse_double(require(kv, "percentile"));
  const std::string& m = require(kv, "method");
  check(m == "nearest_rank" || m == "linear_interpolation",
        "threshold parse: unknown method '" + m + "'");
  t.method = m == "nearest_rank" ? QuantileMethod::nearest_rank
                                 : QuantileMethod::linear_interpolation;
  t.sample_count = parse_size(require(kv, "sample_count"));
  t.quantile_std_error = parse_double(require(kv, "quantile_std_error"));
  return t;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tgo
