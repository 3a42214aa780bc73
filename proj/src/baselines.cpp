// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/baselines.hpp"

#include "dun/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace dun {

std::string to_string(EnsembleKind k) { return k == EnsembleKind::standard ? "standard" : "depth"; }

EnsembleKind parse_ensemble_kind(const std::string& s) {
  if (s == "standard") return EnsembleKind::standard;
  if (s == "depth") return EnsembleKind::depth;
  throw std::invalid_argument("unknown ensemble kind '" + s + "'");
}

EnsembleModel train_ensemble(const EnsembleSettings& ensemble, const ArchitectureConfig& base, const Matrix2D& x,
                             const Matrix2D& y, const OptimizerConfig& opt, TrainSettings settings) {
  if (ensemble.members < 1) throw std::invalid_argument("ensemble needs at least one member");
  if (ensemble.kind == EnsembleKind::depth) {
    const std::size_t available = base.max_depth + 1;
    if (ensemble.members > available || ensemble.min_depth + ensemble.members > available)
      throw std::invalid_argument("depth ensemble of " + std::to_string(ensemble.members) + " members starting at depth " +
                                  std::to_string(ensemble.min_depth) + " needs depths beyond max_depth " +
                                  std::to_string(base.max_depth));
  }
  EnsembleModel ens;
  ens.kind = ensemble.kind;
  const std::uint64_t base_seed = settings.seed;
  for (std::size_t m = 0; m < ensemble.members; ++m) {
    ArchitectureConfig c = base;
    if (ensemble.kind == EnsembleKind::depth) c.max_depth = ensemble.min_depth + m;
    const std::uint64_t seed = base_seed + m;
    DunModel member = DunModel::create(c, seed);
    OptimizerState state(opt);
    settings.seed = seed;
    ens.records.push_back(train_vanilla(member, x, y, state, settings));
    ens.members.push_back(std::move(member));
    ens.seeds.push_back(seed);
  }
  return ens;
}

namespace {

/// Uniform mixture of per-sample outputs, reusing the depth marginalizer.
Prediction uniform_mixture(Task task, const std::vector<Matrix2D>& outputs, const std::vector<double>& noise_vars) {
  const DepthDistribution uniform = DepthDistribution::uniform(outputs.size());
  if (task == Task::classification) return marginalize(task, outputs, uniform, 1.0);
  Prediction pred;
  pred.task = task;
  pred.mixture.weights.assign(uniform.probs().begin(), uniform.probs().end());
  pred.mixture.means = outputs;
  pred.mixture.noise_vars = noise_vars;
  return pred;
}

}  // namespace

Prediction ensemble_predict(const EnsembleModel& ens, const Matrix2D& x) {
  if (ens.members.empty()) throw std::invalid_argument("empty ensemble");
  std::vector<Matrix2D> outputs;
  std::vector<double> noise_vars;
  for (const auto& m : ens.members) {
    outputs.push_back(subnetwork_forward(m, x, m.max_depth()));
    noise_vars.push_back(m.noise_std() * m.noise_std());
  }
  return uniform_mixture(ens.members.front().config().task, outputs, noise_vars);
}

Prediction dropout_predict_mc(const DunModel& model, const Matrix2D& x, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("MC dropout needs at least one sample");
  Rng rng(seed);
  ForwardOptions opts;
  opts.mode = Mode::eval;
  opts.dropout_rng = &rng;
  std::vector<Matrix2D> outputs;
  outputs.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    auto per_depth = model.forward(x, opts);
    outputs.push_back(std::move(per_depth.back()));
  }
  const double var = model.noise_std() * model.noise_std();
  return uniform_mixture(model.config().task, outputs, std::vector<double>(samples, var));
}

void save_ensemble(const EnsembleModel& ens, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("cannot write ensemble manifest in " + dir.string());
  manifest << "kind=" << to_string(ens.kind) << "\n" << "members=" << ens.size() << "\n" << "seeds=";
  for (std::size_t i = 0; i < ens.seeds.size(); ++i) manifest << (i ? "," : "") << ens.seeds[i];
  manifest << "\n";
  for (std::size_t i = 0; i < ens.size(); ++i)
    save_checkpoint(ens.members[i], dir / ("member_" + std::to_string(i) + ".ckpt"));
}

EnsembleModel load_ensemble(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("missing ensemble manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(manifest, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!kv.count("kind") || !kv.count("members")) throw std::runtime_error("malformed ensemble manifest");
  EnsembleModel ens;
  ens.kind = parse_ensemble_kind(kv["kind"]);
  const std::size_t count = std::stoul(kv["members"]);
  std::stringstream seeds(kv["seeds"]);
  for (std::string s; std::getline(seeds, s, ',');) ens.seeds.push_back(std::stoull(s));
  for (std::size_t i = 0; i < count; ++i)
    ens.members.push_back(load_checkpoint(dir / ("member_" + std::to_string(i) + ".ckpt")));
  return ens;
}

}  // namespace dun
