// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/cli.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace dun::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_count(const std::string& v) {
  std::size_t used = 0;
  const long long x = std::stoll(v, &used);
  if (used != v.size() || x < 0) throw std::invalid_argument("expected a non-negative integer");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("expected a number");
  return x;
}

bool to_flag(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true or false");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"method", [](auto& c, const auto& v) { c.method = parse_method(v); }},
      {"dataset", [](auto& c, const auto& v) { c.dataset = v; }},
      {"n", [](auto& c, const auto& v) { c.n = to_count(v); }},
      {"test_n", [](auto& c, const auto& v) { c.test_n = to_count(v); }},
      {"data_seed", [](auto& c, const auto& v) { c.data_seed = to_count(v); }},
      {"csv", [](auto& c, const auto& v) { c.csv = v; }},
      {"target_column", [](auto& c, const auto& v) { c.target_column = std::stol(v); }},
      {"has_header", [](auto& c, const auto& v) { c.has_header = to_flag(v); }},
      {"task", [](auto& c, const auto& v) { c.task = parse_task(v); }},
      {"split", [](auto& c, const auto& v) { c.split = parse_split_kind(v); }},
      {"test_fraction", [](auto& c, const auto& v) { c.test_fraction = to_real(v); }},
      {"gap_feature", [](auto& c, const auto& v) { c.gap_feature = to_count(v); }},
      {"split_seed", [](auto& c, const auto& v) { c.split_seed = to_count(v); }},
      {"normalize", [](auto& c, const auto& v) { c.normalize = to_flag(v); }},
      {"width", [](auto& c, const auto& v) { c.width = to_count(v); }},
      {"max_depth", [](auto& c, const auto& v) { c.max_depth = to_count(v); }},
      {"residual", [](auto& c, const auto& v) { c.residual = to_flag(v); }},
      {"batchnorm", [](auto& c, const auto& v) { c.batchnorm = to_flag(v); }},
      {"dropout", [](auto& c, const auto& v) { c.dropout = to_real(v); }},
      {"lr", [](auto& c, const auto& v) { c.optimizer.lr = to_real(v); }},
      {"momentum", [](auto& c, const auto& v) { c.optimizer.momentum = to_real(v); }},
      {"weight_decay", [](auto& c, const auto& v) { c.optimizer.weight_decay = to_real(v); }},
      {"epochs", [](auto& c, const auto& v) { c.epochs = to_count(v); }},
      {"batch_size", [](auto& c, const auto& v) { c.batch_size = to_count(v); }},
      {"q_freeze_epochs", [](auto& c, const auto& v) { c.q_freeze_epochs = to_count(v); }},
      {"seeds",
       [](auto& c, const auto& v) {
         c.seeds.clear();
         std::stringstream ss(v);
         for (std::string s; std::getline(ss, s, ',');) c.seeds.push_back(to_count(trim(s)));
         if (c.seeds.empty()) throw std::invalid_argument("at least one seed required");
       }},
      {"ensemble_size", [](auto& c, const auto& v) { c.ensemble_size = to_count(v); }},
      {"ensemble_min_depth", [](auto& c, const auto& v) { c.ensemble_min_depth = to_count(v); }},
      {"mc_samples", [](auto& c, const auto& v) { c.mc_samples = to_count(v); }},
      {"depth_min", [](auto& c, const auto& v) { c.depth_min = to_count(v); }},
      {"depth_max", [](auto& c, const auto& v) { c.depth_max = to_count(v); }},
      {"tau", [](auto& c, const auto& v) { c.tau = to_real(v); }},
      {"bins", [](auto& c, const auto& v) { c.bins = to_count(v); }},
      {"record_wall_time", [](auto& c, const auto& v) { c.record_wall_time = to_flag(v); }},
      {"out", [](auto& c, const auto& v) { c.out = v; }},
  };
  return table;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::dun_vi: return "dun_vi";
    case Method::dun_mll: return "dun_mll";
    case Method::vanilla: return "vanilla";
    case Method::ensemble: return "ensemble";
    case Method::depth_ensemble: return "depth_ensemble";
    case Method::dropout: return "dropout";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::dun_vi, Method::dun_mll, Method::vanilla, Method::ensemble, Method::depth_ensemble,
                   Method::dropout})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown method '" + s +
                              "' (expected dun_vi, dun_mll, vanilla, ensemble, depth_ensemble or dropout)");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::map<std::string, const Setter*> lookup;
  for (const auto& [k, fn] : setters()) lookup[k] = &fn;

  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = lookup.find(key);
    if (it == lookup.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      (*it->second)(config, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + "bad value '" + value + "' for '" + key + "': " + e.what());
    }
  }

  try {
    config.optimizer.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
  if (!config.csv.empty()) {
    if (config.csv.is_relative()) config.csv = base_dir / config.csv;
    if (!std::filesystem::exists(config.csv)) throw ConfigError("csv file does not exist: " + config.csv.string());
  }
  if (config.depth_min > config.depth_max) throw ConfigError("depth_min exceeds depth_max");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (config.width < 1) throw ConfigError("width must be >= 1");
  if (config.mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

Dataset prepare_dataset(const ExperimentConfig& config) {
  Dataset ds;
  if (!config.csv.empty()) {
    CsvOptions opts;
    opts.target_column = config.target_column;
    opts.has_header = config.has_header;
    opts.task = config.task;
    ds = load_csv(config.csv, opts);
  } else {
    ds = generate_toy(config.dataset, config.n, config.data_seed);
  }

  if (config.test_n > 0) {
    if (!config.csv.empty()) throw ConfigError("test_n only applies to toy datasets");
    const Dataset extra = generate_toy(config.dataset, config.test_n, config.data_seed + 1);
    const auto n_train = static_cast<Eigen::Index>(ds.size());
    Matrix2D x(n_train + extra.x.rows(), ds.x.cols()), y(n_train + extra.y.rows(), ds.y.cols());
    x << ds.x, extra.x;
    y << ds.y, extra.y;
    ds.x = std::move(x);
    ds.y = std::move(y);
    ds.train.clear();
    ds.test.clear();
    for (std::size_t i = 0; i < ds.size(); ++i)
      (i < static_cast<std::size_t>(n_train) ? ds.train : ds.test).push_back(i);
  } else {
    SplitSpec spec;
    spec.kind = config.split;
    spec.test_fraction = config.test_fraction;
    spec.gap_feature = config.gap_feature;
    spec.seed = config.split_seed;
    ds = split(ds, spec);
  }
  return config.normalize ? normalize(ds) : ds;
}

ArchitectureConfig architecture_for(const ExperimentConfig& config, const Dataset& data, std::size_t depth) {
  ArchitectureConfig a;
  a.input_dim = data.input_dim();
  a.output_dim = data.output_dim();
  a.task = data.task;
  a.width = config.width;
  a.max_depth = depth;
  a.residual = config.residual;
  a.batchnorm = config.batchnorm;
  a.dropout = config.method == Method::dropout ? config.dropout : 0.0;
  return a;
}

}  // namespace dun::cli
