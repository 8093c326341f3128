// tgo-lab: experiment driver for threshold-guided optimization on exactly
// enumerable environments. Subcommands: simulate, train, verify, sweep.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tgo/analysis.hpp"
#include "tgo/io.hpp"
#include "tgo/svg.hpp"
#include "tgo/verify.hpp"

namespace fs = std::filesystem;
using namespace tgo;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- config helpers ------------------------------------------------------

class Config {
 public:
  explicit Config(FlatMap kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      check(pos == it->second.size(), "trailing characters");
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + key + "' is not a number: '" + it->second +
                                  "'");
    }
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    double v = get_double(key, static_cast<double>(fallback));
    check(v >= 0 && v == std::floor(v), "config: key '" + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config: key '" + key + "' must be true or false");
  }

  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string cell;
    while (std::getline(in, cell, ',')) {
      try {
        out.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' has a non-numeric entry: '" +
                                    cell + "'");
      }
    }
    check(!out.empty(), "config: key '" + key + "' is empty");
    return out;
  }

 private:
  FlatMap kv_;
};

TabularEnv env_from_config(const Config& config, std::string* env_text) {
  if (config.has("env.path")) {
    *env_text = read_file(config.get("env.path", ""));
    return env_from_string(*env_text);
  }
  std::string kind = config.get("env.reward_kind", "bimodal");
  RewardSpec spec;
  if (kind == "bimodal")
    spec = RewardSpec::bimodal();
  else if (kind == "uniform_random")
    spec = RewardSpec::uniform_random();
  else if (kind == "constant")
    spec = RewardSpec::constant(config.get_double("env.constant_value", 0.0));
  else
    throw std::invalid_argument("config: unknown env.reward_kind '" + kind + "'");
  TabularEnv env = make_tabular(config.get_size("env.seed", 1000),
                                config.get_size("env.num_prompts", 4),
                                config.get_size("env.num_outcomes", 6), spec);
  *env_text = env_to_string(env);
  return env;
}

ScoreModel score_model_from_config(const Config& config) {
  ScoreModel model;
  std::string transform = config.get("score.transform", "identity");
  if (transform == "identity")
    model.transform = ScoreTransform::identity();
  else if (transform == "affine")
    model.transform = ScoreTransform::affine(config.get_double("score.a", 1.0),
                                             config.get_double("score.b", 0.0));
  else if (transform == "logistic_squash")
    model.transform = ScoreTransform::logistic_squash();
  else
    throw std::invalid_argument("config: unknown score.transform '" + transform + "'");
  model.noise_scale = config.get_double("score.noise_scale", 0.0);
  std::string noise = config.get("score.noise", "gaussian");
  if (noise == "gaussian")
    model.noise = NoiseKind::gaussian;
  else if (noise == "bounded_uniform")
    model.noise = NoiseKind::bounded_uniform;
  else
    throw std::invalid_argument("config: unknown score.noise '" + noise + "'");
  model.validate();
  return model;
}

QuantileMethod quantile_method_from_config(const Config& config) {
  std::string m = config.get("train.quantile_method", "linear_interpolation");
  if (m == "linear_interpolation") return QuantileMethod::linear_interpolation;
  if (m == "nearest_rank") return QuantileMethod::nearest_rank;
  throw std::invalid_argument("config: unknown train.quantile_method '" + m + "'");
}

TrainConfig train_config_from_config(const Config& config, std::uint64_t seed) {
  TrainConfig tc;
  tc.batch_size = config.get_size("train.batch_size", tc.batch_size);
  tc.epochs = config.get_size("train.epochs", tc.epochs);
  tc.learning_rate = config.get_double("train.learning_rate", tc.learning_rate);
  std::string opt = config.get("train.optimizer", "sgd");
  if (opt == "sgd")
    tc.optimizer = Optimizer::sgd;
  else if (opt == "sgd_momentum")
    tc.optimizer = Optimizer::sgd_momentum;
  else
    throw std::invalid_argument("config: unknown train.optimizer '" + opt + "'");
  tc.momentum = config.get_double("train.momentum", tc.momentum);
  tc.refresh_reference = config.get_bool("train.refresh_reference", false);
  tc.reestimate_threshold_on_refresh =
      config.get_bool("train.reestimate_threshold_on_refresh", true);
  tc.seed = seed;
  std::string objective = config.get("train.objective", "tgo");
  if (objective == "tgo")
    tc.objective = Objective::tgo;
  else if (objective == "dpo")
    tc.objective = Objective::dpo;
  else if (objective == "sft")
    tc.objective = Objective::sft;
  else
    throw std::invalid_argument("config: unknown train.objective '" + objective + "'");
  tc.tgo.beta = config.get_double("tgo.beta", tc.tgo.beta);
  tc.tgo.c = config.get_double("tgo.c", tc.tgo.c);
  tc.tgo.percentile = config.get_double("tgo.percentile", tc.tgo.percentile);
  std::string mode = config.get("tgo.numeric_mode", "exact_logsigmoid");
  if (mode == "exact_logsigmoid")
    tc.tgo.numeric_mode = NumericMode::exact_logsigmoid;
  else if (mode == "clipped_sigmoid")
    tc.tgo.numeric_mode = NumericMode::clipped_sigmoid;
  else
    throw std::invalid_argument("config: unknown tgo.numeric_mode '" + mode + "'");
  tc.tgo.clip_eps = config.get_double("tgo.clip_eps", tc.tgo.clip_eps);
  tc.quantile_method = quantile_method_from_config(config);
  tc.validate();
  return tc;
}

void write_manifest(const std::string& command, const std::string& config_path,
                    std::uint64_t seed, const fs::path& out_dir, const std::string& env_text) {
  FlatMap kv;
  kv["command"] = command;
  kv["config_path"] = config_path;
  kv["seed"] = std::to_string(seed);
  kv["output_dir"] = out_dir.string();
  kv["tool_version"] = kToolVersion;
  char fingerprint[20];
  std::snprintf(fingerprint, sizeof(fingerprint), "%016llx",
                static_cast<unsigned long long>(fnv1a64(env_text)));
  kv["env_fingerprint"] = fingerprint;
  atomic_write_file((out_dir / "manifest.txt").string(), flat_to_string(kv));
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory: " + dir.string());
  return dir;
}

std::string curve_csv(const std::string& x_name, const std::string& y_name,
                      const std::vector<double>& y) {
  CsvTable table;
  table.header = {x_name, y_name};
  for (std::size_t i = 0; i < y.size(); ++i)
    table.rows.push_back({std::to_string(i), format_double(y[i])});
  return table.to_string();
}

std::vector<double> index_axis(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  return x;
}

// ---- subcommands ---------------------------------------------------------

int cmd_simulate(const Config& config, const std::string& config_path, std::uint64_t seed,
                 const std::string& out) {
  fs::path dir = prepare_out_dir(out);
  std::string env_text;
  TabularEnv env = env_from_config(config, &env_text);
  write_manifest("simulate", config_path, seed, dir, env_text);

  std::size_t n = config.get_size("data.n_samples", 2000);
  ScoreModel model = score_model_from_config(config);

  RngStream data_stream = RngStream::derive(seed, 0);
  RngStream score_stream = RngStream::derive(seed, 1);
  std::vector<SampleRecord> samples = sample_dataset(env, env.reference_policy(), n, data_stream);
  ScoredDataset scored = score_dataset(samples, model, score_stream, "reference");

  std::vector<double> scores;
  for (const ScoredRecord& r : scored.records) scores.push_back(r.score);
  Threshold threshold = estimate_threshold(scores, config.get_double("tgo.percentile", 0.5),
                                           quantile_method_from_config(config));

  atomic_write_file((dir / "env.txt").string(), env_text);
  atomic_write_file((dir / "dataset.csv").string(), scored_dataset_to_csv(scored));
  atomic_write_file((dir / "threshold.txt").string(), threshold_to_string(threshold));
  std::cout << "simulate: wrote " << scored.records.size() << " records to " << dir.string()
            << "\n";
  return kExitOk;
}

int cmd_train(const Config& config, const std::string& config_path, std::uint64_t seed,
              const std::string& out) {
  fs::path dir = prepare_out_dir(out);
  std::string env_text;
  TabularEnv env = env_from_config(config, &env_text);
  write_manifest("train", config_path, seed, dir, env_text);

  TrainConfig tc = train_config_from_config(config, seed);
  ScoreModel model = score_model_from_config(config);
  std::size_t n = config.get_size("data.n_samples", 2000);

  TrainReport report;
  try {
    report = run_offline(env, env.reference_policy(), model, n, tc);
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("non-finite loss") != std::string::npos)
      throw NumericFailure(e.what());
    throw;
  }

  atomic_write_file((dir / "env.txt").string(), env_text);
  atomic_write_file((dir / "loss.csv").string(), curve_csv("step", "loss", report.loss_curve));
  {
    CsvTable table;
    table.header = {"epoch", "mean_reward", "kl_to_ref", "kl_to_optimal"};
    for (std::size_t i = 0; i < report.mean_reward_curve.size(); ++i)
      table.rows.push_back({std::to_string(i), format_double(report.mean_reward_curve[i]),
                            format_double(report.kl_to_ref_curve[i]),
                            format_double(report.kl_to_optimal_curve[i])});
    atomic_write_file((dir / "curves.csv").string(), table.to_string());
  }
  {
    CsvTable table;
    table.header = {"index", "value", "percentile", "sample_count", "quantile_std_error"};
    for (std::size_t i = 0; i < report.threshold_history.size(); ++i) {
      const Threshold& t = report.threshold_history[i];
      table.rows.push_back({std::to_string(i), format_double(t.value),
                            format_double(t.percentile), std::to_string(t.sample_count),
                            format_double(t.quantile_std_error)});
    }
    atomic_write_file((dir / "thresholds.csv").string(), table.to_string());
  }
  atomic_write_file((dir / "policy.txt").string(), policy_to_string(report.final_policy));

  atomic_write_file((dir / "loss.svg").string(),
                    svg_line_chart("training loss", index_axis(report.loss_curve.size()),
                                   report.loss_curve));
  atomic_write_file((dir / "mean_reward.svg").string(),
                    svg_line_chart("mean reward", index_axis(report.mean_reward_curve.size()),
                                   report.mean_reward_curve));
  atomic_write_file((dir / "kl_to_ref.svg").string(),
                    svg_line_chart("KL to reference", index_axis(report.kl_to_ref_curve.size()),
                                   report.kl_to_ref_curve));
  atomic_write_file(
      (dir / "kl_to_optimal.svg").string(),
      svg_line_chart("KL to optimum", index_axis(report.kl_to_optimal_curve.size()),
                     report.kl_to_optimal_curve));

  std::cout << "train: final mean reward " << format_double(report.mean_reward_curve.back())
            << ", outputs in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& config_path, std::uint64_t seed, const std::string& out,
               const std::string& level_name) {
  fs::path dir = prepare_out_dir(out);
  write_manifest("verify", config_path, seed, dir, "");

  VerifyLevel level;
  if (level_name == "fast")
    level = VerifyLevel::fast;
  else if (level_name == "full")
    level = VerifyLevel::full;
  else
    throw std::invalid_argument("unknown --level '" + level_name + "' (expected fast or full)");

  std::vector<CheckResult> results = run_verification(level);

  CsvTable table;
  table.header = {"name", "status", "value", "detail", "seconds"};
  bool any_failed = false;
  for (const CheckResult& r : results) {
    std::string status = r.skipped ? "skipped" : (r.passed ? "pass" : "FAIL");
    if (!r.skipped && !r.passed) any_failed = true;
    std::string detail = r.detail;
    for (char& ch : detail)
      if (ch == ',' || ch == '\n') ch = ';';
    table.rows.push_back({r.name, status, format_double(r.value), detail,
                          format_double(r.seconds)});
    std::printf("%-32s %-8s %s\n", r.name.c_str(), status.c_str(), r.detail.c_str());
  }
  atomic_write_file((dir / "checks.csv").string(), table.to_string());

  if (any_failed) {
    std::cout << "verify: FAILED checks:";
    for (const CheckResult& r : results)
      if (!r.skipped && !r.passed) std::cout << ' ' << r.name;
    std::cout << "\n";
    return kExitVerifyFailure;
  }
  std::cout << "verify: all checks passed (" << results.size() << " checks, level " << level_name
            << ")\n";
  return kExitOk;
}

int cmd_sweep(const Config& config, const std::string& config_path, std::uint64_t seed,
              const std::string& out) {
  fs::path dir = prepare_out_dir(out);
  std::string env_text;
  TabularEnv env = env_from_config(config, &env_text);
  write_manifest("sweep", config_path, seed, dir, env_text);

  std::vector<double> percentiles =
      config.get_doubles("sweep.percentiles", {0.1, 0.3, 0.5, 0.7, 0.9});
  if (percentiles.size() < 2)
    throw std::invalid_argument(
        "sweep needs at least two percentiles "
        "(set sweep.percentiles = p1,p2,... in the config)");

  TrainConfig tc = train_config_from_config(config, seed);
  ScoreModel model = score_model_from_config(config);
  std::size_t n = config.get_size("data.n_samples", 2000);
  std::size_t replicates = config.get_size("sweep.replicates", 10);

  SensitivityGrid grid =
      threshold_sensitivity(env, tc, model, n, percentiles, replicates, seed, 0);

  CsvTable table;
  table.header = {"percentile", "replicate", "mean_reward", "kl_to_optimal",
                  "calibration_error"};
  for (const SensitivityRow& row : grid.rows)
    table.rows.push_back({format_double(row.percentile), std::to_string(row.replicate),
                          format_double(row.mean_reward), format_double(row.kl_to_optimal),
                          format_double(row.calibration_error)});

  // Aggregate rows: per-percentile medians over replicates, replicate column
  // set to the literal "median".
  std::vector<std::string> labels;
  std::vector<double> med_reward, med_kl, med_cal;
  for (double p : percentiles) {
    std::vector<double> rewards, kls, cals;
    for (const SensitivityRow& row : grid.rows)
      if (row.percentile == p) {
        rewards.push_back(row.mean_reward);
        kls.push_back(row.kl_to_optimal);
        cals.push_back(row.calibration_error);
      }
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      std::size_t n2 = v.size();
      return n2 % 2 ? v[n2 / 2] : 0.5 * (v[n2 / 2 - 1] + v[n2 / 2]);
    };
    med_reward.push_back(median(rewards));
    med_kl.push_back(median(kls));
    med_cal.push_back(median(cals));
    labels.push_back(format_double(p));
    table.rows.push_back({format_double(p), "median", format_double(med_reward.back()),
                          format_double(med_kl.back()), format_double(med_cal.back())});
  }
  atomic_write_file((dir / "grid.csv").string(), table.to_string());

  atomic_write_file((dir / "mean_reward.svg").string(),
                    svg_bar_chart("median final mean reward by percentile", labels, med_reward));
  atomic_write_file((dir / "kl_to_optimal.svg").string(),
                    svg_bar_chart("median KL to optimum by percentile", labels, med_kl));
  atomic_write_file(
      (dir / "calibration_error.svg").string(),
      svg_bar_chart("median calibration error by percentile", labels, med_cal));

  std::cout << "sweep: " << grid.rows.size() << " raw rows + " << percentiles.size()
            << " aggregate rows in " << (dir / "grid.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tgo-lab: threshold-guided optimization experiments on tabular environments"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  std::string out_dir = "out";
  std::string level = "fast";

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* copt = sub->add_option("--config", config_path, "path to a key = value config file");
    if (config_required) copt->required();
    sub->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
      seed_given = true;
    });
    sub->add_option("--out", out_dir, "output directory");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "sample and score a dataset");
  add_common(simulate, true);
  CLI::App* train = app.add_subcommand("train", "run the offline training loop");
  add_common(train, true);
  CLI::App* verify = app.add_subcommand("verify", "run the property and experiment suite");
  add_common(verify, false);
  verify->add_option("--level", level, "fast or full")
      ->check(CLI::IsMember({"fast", "full"}));
  CLI::App* sweep = app.add_subcommand("sweep", "percentile sensitivity sweep");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    FlatMap kv;
    if (!config_path.empty()) kv = flat_from_file(config_path);
    Config config(kv);
    std::uint64_t seed = seed_given ? seed_flag : config.get_size("seed", 0);

    if (simulate->parsed()) return cmd_simulate(config, config_path, seed, out_dir);
    if (train->parsed()) return cmd_train(config, config_path, seed, out_dir);
    if (verify->parsed()) return cmd_verify(config_path, seed, out_dir, level);
    return cmd_sweep(config, config_path, seed, out_dir);
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
