// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/baselines.hpp"
#include "dun/checkpoint.hpp"
#include "dun/cli.hpp"
#include "dun/metrics.hpp"
#include "dun/objectives.hpp"
#include "dun/pruning.hpp"
#include "dun/svg.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace dun::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string seed_file(const std::string& stem, std::uint64_t seed, const std::string& ext) {
  return stem + "_" + std::to_string(seed) + ext;
}

/// Config with command-line overrides applied and the output directory created.
ExperimentConfig resolve(const fs::path& config_path, const GlobalOptions& global) {
  ExperimentConfig config = load_config(config_path);
  if (global.seed_override) config.seeds = {*global.seed_override};
  if (global.out) config.out = *global.out;
  fs::create_directories(config.out);
  return config;
}

/// Runs job(seed) for every seed on up to `threads` workers and rethrows the
/// first failure in seed order.
void for_each_seed(const std::vector<std::uint64_t>& seeds, std::size_t threads,
                   const std::function<void(std::uint64_t)>& job) {
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        job(seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, seeds.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

TrainSettings settings_for(const ExperimentConfig& c, std::uint64_t seed) {
  TrainSettings s;
  s.epochs = c.epochs;
  s.batch_size = c.batch_size;
  s.q_freeze_epochs = c.q_freeze_epochs;
  s.seed = seed;
  s.record_wall_time = c.record_wall_time;
  return s;
}

/// Points the variational logits at `q`; exact zeros become -1e3, which
/// still map to probability zero.
void set_depth_weights(DunModel& model, const DepthDistribution& q) {
  for (std::size_t i = 0; i < q.size(); ++i)
    model.variational_logits.value(0, static_cast<Eigen::Index>(i)) = std::max(q.logits()[i], -1e3);
}

struct Trained {
  DunModel model;
  std::optional<EnsembleModel> ensemble;
  RunRecord record;
};

Trained train_method(const ExperimentConfig& c, const Dataset& data, std::uint64_t seed) {
  const Matrix2D x = data.train_x();
  const Matrix2D y = data.train_y();
  const TrainSettings settings = settings_for(c, seed);
  Trained t;
  if (c.method == Method::ensemble || c.method == Method::depth_ensemble) {
    EnsembleSettings es;
    es.kind = c.method == Method::ensemble ? EnsembleKind::standard : EnsembleKind::depth;
    es.members = c.ensemble_size;
    es.min_depth = c.ensemble_min_depth;
    t.ensemble = train_ensemble(es, architecture_for(c, data, c.max_depth), x, y, c.optimizer, settings);
    t.record = t.ensemble->records.front();
    return t;
  }
  t.model = DunModel::create(architecture_for(c, data, c.max_depth), seed);
  OptimizerState opt(c.optimizer);
  switch (c.method) {
    case Method::dun_vi:
      t.record = train_dun_vi(t.model, x, y, opt, settings);
      break;
    case Method::dun_mll:
      t.record = train_dun_mll(t.model, x, y, opt, settings);
      set_depth_weights(t.model, exact_posterior(full_batch_table(t.model, x, y), t.model.prior()));
      break;
    default:
      t.record = train_vanilla(t.model, x, y, opt, settings);
      set_depth_weights(t.model, DepthDistribution::delta(t.model.max_depth() + 1, t.model.max_depth()));
      break;
  }
  return t;
}

/// Evaluation split: the test indices when present, otherwise the train set.
const std::vector<std::size_t>& eval_indices(const Dataset& data) {
  return data.test.empty() ? data.train : data.test;
}

CalibrationReport score(const ExperimentConfig& c, const Dataset& data, const Prediction& p) {
  const auto& idx = eval_indices(data);
  if (data.task == Task::classification) return evaluate_classification(p.probs, data.labels(idx), c.bins);

  const Matrix2D targets = select_rows(data.y, idx);
  std::vector<PredictiveGaussian> pred;
  std::vector<double> ys;
  for (Eigen::Index col = 0; col < targets.cols(); ++col) {
    double mean_shift = 0.0, scale = 1.0;
    if (data.stats && data.stats->targets_normalized) {
      mean_shift = data.stats->y_mean(col);
      scale = data.stats->y_scale(col);
    }
    for (auto g : moment_match_all(p.mixture, col)) {
      g.mean = g.mean * scale + mean_shift;
      g.variance *= scale * scale;
      g.model_term *= scale * scale;
      g.noise_term *= scale * scale;
      pred.push_back(g);
    }
    for (Eigen::Index r = 0; r < targets.rows(); ++r) ys.push_back(targets(r, col) * scale + mean_shift);
  }
  return evaluate_regression(pred, ys, c.tau, c.bins);
}

Prediction predict_method(const ExperimentConfig& c, const Trained& t, const Matrix2D& x, std::uint64_t seed,
                          const DepthDistribution& weights) {
  if (t.ensemble) return ensemble_predict(*t.ensemble, x);
  if (c.method == Method::dropout) return dropout_predict_mc(t.model, x, c.mc_samples, seed);
  return predict_marginal(t.model, x, weights);
}

std::string report_csv(const ExperimentConfig& c, const Dataset& data, std::uint64_t seed,
                       const std::string& method, const Trained& t, const DepthDistribution& weights) {
  const Matrix2D x = select_rows(data.x, eval_indices(data));
  const auto start = Clock::now();
  const Prediction p = predict_method(c, t, x, seed, weights);
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  std::ostringstream out;
  out << kReportHeader << "\n";
  write_report_row(out, method, data.name, seed, score(c, data, p), c.record_wall_time ? elapsed : 0.0);
  return out.str();
}

std::string trace_csv(const RunRecord& r) {
  std::ostringstream out;
  write_run_record_csv(r, out);
  return out.str();
}

std::vector<double> column(const RunRecord& r, const std::function<double(const EpochRecord&)>& f) {
  std::vector<double> v;
  for (const auto& e : r.epochs) v.push_back(f(e));
  return v;
}

std::vector<svg::Series> depth_series(const RunRecord& r, bool use_posterior) {
  std::vector<svg::Series> out;
  const auto epochs = column(r, [](const EpochRecord& e) { return static_cast<double>(e.epoch); });
  const std::size_t depths = r.epochs.front().q.size();
  for (std::size_t d = 0; d < depths; ++d)
    out.push_back({"d=" + std::to_string(d), epochs,
                   column(r, [&](const EpochRecord& e) { return use_posterior ? e.posterior[d] : e.q[d]; })});
  return out;
}

/// Maps exceptions to the stable exit codes.
int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

void check_compatible(const DunModel& m, const Dataset& data) {
  const auto& a = m.config();
  if (a.input_dim != data.input_dim() || a.output_dim != data.output_dim() || a.task != data.task)
    throw ConfigError("checkpoint expects " + to_string(a.task) + " with " + std::to_string(a.input_dim) +
                      " inputs and " + std::to_string(a.output_dim) + " outputs; dataset has " +
                      to_string(data.task) + " with " + std::to_string(data.input_dim()) + " and " +
                      std::to_string(data.output_dim()));
}

}  // namespace

int cmd_train(const fs::path& config_path, const GlobalOptions& global) {
  return guarded([&] {
    const ExperimentConfig c = resolve(config_path, global);
    const Dataset data = prepare_dataset(c);
    for_each_seed(c.seeds, global.threads, [&](std::uint64_t seed) {
      const Trained t = train_method(c, data, seed);
      write_file(c.out / seed_file("trace", seed, ".csv"), trace_csv(t.record));
      const fs::path ckpt = c.out / seed_file("model", seed, ".ckpt");
      fs::remove_all(ckpt);  // a rerun may switch between file and directory checkpoints
      if (t.ensemble)
        save_ensemble(*t.ensemble, ckpt);
      else
        save_checkpoint(t.model, ckpt);
      write_file(c.out / seed_file("report", seed, ".csv"),
                 report_csv(c, data, seed, to_string(c.method), t,
                            t.ensemble ? DepthDistribution::uniform(1) : t.model.variational()));
    });
  });
}

int cmd_eval(const EvalOptions& options, const GlobalOptions& global) {
  return guarded([&] {
    if (!fs::exists(options.checkpoint)) throw ConfigError("checkpoint not found: " + options.checkpoint.string());
    ExperimentConfig c = load_config(options.config);
    if (global.out) c.out = *global.out;
    const Dataset data = prepare_dataset(c);

    Trained t;
    std::uint64_t seed = 0;
    if (fs::is_directory(options.checkpoint)) {
      t.ensemble = load_ensemble(options.checkpoint);
      for (const auto& m : t.ensemble->members) check_compatible(m, data);
      seed = t.ensemble->seeds.front();
    } else {
      t.model = load_checkpoint(options.checkpoint);
      check_compatible(t.model, data);
      seed = t.model.seed();
    }
    if (global.seed_override) seed = *global.seed_override;

    DepthDistribution weights = t.ensemble ? DepthDistribution::uniform(1) : t.model.variational();
    if (!t.ensemble && options.exact_posterior)
      weights = exact_posterior(full_batch_table(t.model, data.train_x(), data.train_y()), t.model.prior());
    if (!t.ensemble && options.prune)
      weights = truncate_posterior(weights, select_depth(weights, parse_prune_strategy(*options.prune)));

    const std::string report = report_csv(c, data, seed, to_string(c.method), t, weights);
    std::cout << report;
    fs::create_directories(c.out);
    write_file(c.out / "report_eval.csv", report);
  });
}

int cmd_compare_objectives(const fs::path& config_path, const GlobalOptions& global) {
  return guarded([&] {
    const ExperimentConfig c = resolve(config_path, global);
    const Dataset data = prepare_dataset(c);
    const Matrix2D x = data.train_x();
    const Matrix2D y = data.train_y();
    for_each_seed(c.seeds, global.threads, [&](std::uint64_t seed) {
      const DunModel init = DunModel::create(architecture_for(c, data, c.max_depth), seed);
      const TrainSettings settings = settings_for(c, seed);
      DunModel mll_model = init, vi_model = init;
      OptimizerState mll_opt(c.optimizer), vi_opt(c.optimizer);
      const RunRecord mll_run = train_dun_mll(mll_model, x, y, mll_opt, settings);
      const RunRecord vi_run = train_dun_vi(vi_model, x, y, vi_opt, settings);

      std::ostringstream combined;
      bool header_done = false;
      for (const auto& [name, run] : {std::pair{"mll", &mll_run}, std::pair{"vi", &vi_run}}) {
        std::istringstream lines(trace_csv(*run));
        std::string line;
        std::getline(lines, line);
        if (!header_done) combined << "run," << line << "\n";
        header_done = true;
        while (std::getline(lines, line)) combined << name << "," << line << "\n";
      }
      write_file(c.out / seed_file("compare", seed, ".csv"), combined.str());

      const auto epochs = column(mll_run, [](const EpochRecord& e) { return static_cast<double>(e.epoch); });
      std::vector<svg::Panel> panels(4);
      panels[0] = {"MLL training", "epoch", "objective / N", {}, {}};
      panels[0].lines.push_back({"MLL", epochs, column(mll_run, [&](const EpochRecord& e) { return e.mll / x.rows(); })});
      panels[1] = {"VI training", "epoch", "objective / N", {}, {}};
      panels[1].lines.push_back({"MLL", epochs, column(vi_run, [&](const EpochRecord& e) { return e.mll / x.rows(); })});
      panels[1].lines.push_back({"ELBO", epochs, column(vi_run, [&](const EpochRecord& e) { return e.elbo / x.rows(); })});
      panels[2] = {"MLL: posterior over depth", "epoch", "probability", depth_series(mll_run, true), {}};
      panels[3] = {"VI: q over depth", "epoch", "probability", depth_series(vi_run, false), {}};
      write_file(c.out / seed_file("compare", seed, ".svg"), svg::render(panels));
    });
  });
}

int cmd_sweep_depth(const fs::path& config_path, const GlobalOptions& global) {
  return guarded([&] {
    ExperimentConfig c = resolve(config_path, global);
    if (c.depth_min < 1) throw ConfigError("depth_min must be >= 1");
    const Dataset data = prepare_dataset(c);
    for_each_seed(c.seeds, global.threads, [&](std::uint64_t seed) {
      ExperimentConfig ddn = c;
      ddn.method = Method::vanilla;
      std::ostringstream table;
      table << "depth,test_ll,test_err\n" << std::setprecision(17);
      svg::Series ll_series{"DDN test LL", {}, {}};
      for (std::size_t d = c.depth_min; d <= c.depth_max; ++d) {
        ddn.max_depth = d;
        const Trained t = train_method(ddn, data, seed);
        const std::string report = report_csv(ddn, data, seed, "ddn", t, t.model.variational());
        write_file(c.out / ("report_ddn_" + std::to_string(d) + "_" + std::to_string(seed) + ".csv"), report);
        const Prediction p = predict_marginal(t.model, select_rows(data.x, eval_indices(data)), t.model.variational());
        const CalibrationReport r = score(ddn, data, p);
        const double err = data.task == Task::classification ? *r.err : *r.rmse;
        table << d << "," << r.ll << "," << err << "\n";
        ll_series.x.push_back(static_cast<double>(d));
        ll_series.y.push_back(r.ll);
      }
      write_file(c.out / seed_file("sweep", seed, ".csv"), table.str());

      ExperimentConfig dun = c;
      dun.method = Method::dun_vi;
      dun.max_depth = c.depth_max;
      const Trained t = train_method(dun, data, seed);
      const DepthDistribution q = t.model.variational();
      write_file(c.out / seed_file("report_dun", seed, ".csv"), report_csv(dun, data, seed, "dun_vi", t, q));

      std::ostringstream posterior, dopt;
      posterior << "depth,q\n" << std::setprecision(17);
      svg::Panel bars{"DUN q over depth", "depth", "probability", {}, {}};
      for (std::size_t d = 0; d < q.size(); ++d) {
        posterior << d << "," << q[d] << "\n";
        bars.bars.push_back({std::to_string(d), q[d]});
      }
      dopt << "strategy,d_opt\n";
      for (PruneKind k : {PruneKind::argmax, PruneKind::percentile95, PruneKind::expected})
        dopt << to_string(k) << "," << select_depth(q, PruneStrategy{k}) << "\n";
      write_file(c.out / seed_file("posterior", seed, ".csv"), posterior.str());
      write_file(c.out / seed_file("dopt", seed, ".csv"), dopt.str());

      svg::Panel lls{"Test log-likelihood by depth", "depth", "test LL", {ll_series}, {}};
      write_file(c.out / seed_file("sweep", seed, ".svg"), svg::render({lls, bars}));
    });
  });
}

int cmd_gen_data(const GenDataOptions& options, const GlobalOptions& global) {
  return guarded([&] {
    const Dataset ds = generate_toy(options.name, options.n, options.seed);
    const fs::path path = global.out ? *global.out : fs::path(options.name + ".csv");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_csv(ds, path);
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Depth uncertainty networks: training, evaluation and experiment drivers"};
  app.require_subcommand(1);

  GlobalOptions global;
  std::uint64_t seed_override = 0;
  std::string out;
  std::size_t threads = 0;
  auto* seed_opt = app.add_option("--seed-override", seed_override, "Run only this seed");
  auto* out_opt = app.add_option("--out", out, "Output directory (gen-data: output file)");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads for independent seeds (env DUN_THREADS)");

  fs::path config_path;
  auto* train = app.add_subcommand("train", "Train one model per seed");
  train->add_option("config", config_path, "Config file")->required();
  auto* compare = app.add_subcommand("compare-objectives", "Paired MLL and VI training from one initialization");
  compare->add_option("config", config_path, "Config file")->required();
  auto* sweep = app.add_subcommand("sweep-depth", "Fixed-depth networks over a depth range plus one DUN");
  sweep->add_option("config", config_path, "Config file")->required();

  EvalOptions eval_options;
  std::string prune;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on the configured dataset");
  eval->add_option("checkpoint", eval_options.checkpoint, "Checkpoint file or ensemble directory")->required();
  eval->add_option("config", eval_options.config, "Config file describing the dataset")->required();
  eval->add_flag("--exact-posterior", eval_options.exact_posterior, "Use the exact posterior on the train set");
  auto* prune_opt = eval->add_option("--prune", prune, "Truncate at d_opt (argmax, percentile95, expected)");

  GenDataOptions gen;
  auto* gen_data = app.add_subcommand("gen-data", "Write a toy dataset as CSV");
  gen_data->add_option("name", gen.name, "Toy dataset name")->required();
  gen_data->add_option("--n", gen.n, "Number of points");
  gen_data->add_option("--seed", gen.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*seed_opt) global.seed_override = seed_override;
  if (*out_opt) global.out = out;
  if (*threads_opt) {
    global.threads = threads;
  } else if (const char* env = std::getenv("DUN_THREADS")) {
    try {
      global.threads = std::stoul(env);
    } catch (const std::exception&) {
      std::cerr << "error: DUN_THREADS must be a positive integer\n";
      return kExitUsage;
    }
  }
  if (global.threads < 1) {
    std::cerr << "error: thread count must be >= 1\n";
    return kExitUsage;
  }

  if (*train) return cmd_train(config_path, global);
  if (*compare) return cmd_compare_objectives(config_path, global);
  if (*sweep) return cmd_sweep_depth(config_path, global);
  if (*eval) {
    if (*prune_opt) eval_options.prune = prune;
    return cmd_eval(eval_options, global);
  }
  return cmd_gen_data(gen, global);
}

}  // namespace dun::cli
