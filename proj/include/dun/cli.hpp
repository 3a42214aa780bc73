// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/datasets.hpp"
#include "dun/nn.hpp"
#include "dun/training.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dun::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Invalid configuration or command-line usage (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { dun_vi, dun_mll, vanilla, ensemble, depth_ensemble, dropout };

std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Flat `key = value` experiment description; `#` starts a comment.
struct ExperimentConfig {
  Method method = Method::dun_vi;

  // Data: a toy generator name, or a CSV file when `csv` is set.
  std::string dataset = "wiggle";
  std::size_t n = 300;
  /// Extra toy points (generated with data_seed + 1) used as the test split.
  std::size_t test_n = 0;
  std::uint64_t data_seed = 0;
  std::filesystem::path csv;
  long target_column = -1;
  bool has_header = true;
  Task task = Task::regression;
  SplitKind split = SplitKind::none;
  double test_fraction = 0.1;
  std::size_t gap_feature = 0;
  std::uint64_t split_seed = 0;
  bool normalize = true;

  // Architecture (input/output sizes come from the data).
  std::size_t width = 100;
  std::size_t max_depth = 5;
  bool residual = true;
  bool batchnorm = true;
  double dropout = 0.1;  // dropout method only

  OptimizerConfig optimizer;
  std::size_t epochs = 6000;
  std::size_t batch_size = 0;
  std::size_t q_freeze_epochs = 0;
  std::vector<std::uint64_t> seeds{0};

  std::size_t ensemble_size = 5;
  std::size_t ensemble_min_depth = 0;
  std::size_t mc_samples = 100;
  std::size_t depth_min = 1;
  std::size_t depth_max = 5;

  double tau = 0.1;
  std::size_t bins = 10;
  bool record_wall_time = false;
  std::filesystem::path out = "out";
};

/// Throws ConfigError naming the line for unknown keys, malformed lines or
/// bad values. Relative CSV paths resolve against `base_dir`, and the file
/// must exist.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// The documented key list, in the order accepted by parse_config.
std::vector<std::string> config_keys();

/// Loads or generates the dataset, splits and normalizes it.
Dataset prepare_dataset(const ExperimentConfig& config);

ArchitectureConfig architecture_for(const ExperimentConfig& config, const Dataset& data, std::size_t depth);

struct GlobalOptions {
  std::optional<std::uint64_t> seed_override;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> out;
};

/// Each command returns a process exit code and reports errors on stderr.
int cmd_train(const std::filesystem::path& config_path, const GlobalOptions& global);
int cmd_compare_objectives(const std::filesystem::path& config_path, const GlobalOptions& global);
int cmd_sweep_depth(const std::filesystem::path& config_path, const GlobalOptions& global);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path config;
  bool exact_posterior = false;
  std::optional<std::string> prune;
};
int cmd_eval(const EvalOptions& options, const GlobalOptions& global);

struct GenDataOptions {
  std::string name;
  std::size_t n = 300;
  std::uint64_t seed = 0;
};
int cmd_gen_data(const GenDataOptions& options, const GlobalOptions& global);

/// Entry point used by the `dun` executable.
int run(int argc, char** argv);

}  // namespace dun::cli
