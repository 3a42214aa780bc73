// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/model.hpp"
#include "dun/objectives.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace dun {

struct OptimizerConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  void validate() const;
};

/// SGD with heavy-ball momentum: v <- m v + (g + wd p), p <- p - lr v.
/// Weight decay only touches parameters with Param::decay set.
struct OptimizerState {
  OptimizerConfig config;
  std::vector<Matrix2D> velocity;

  explicit OptimizerState(OptimizerConfig c = {}) : config(c) { config.validate(); }
};

/// Frozen parameters are left untouched (velocity included). Throws
/// NumericalError naming the tensor on a non-finite gradient.
void sgd_step(OptimizerState& state, const ParamBundle& params);

struct EpochRecord {
  std::size_t epoch = 0;
  double mll = 0.0;
  double elbo = 0.0;
  double loss = 0.0;
  /// Depth probabilities shown in traces: q for VI, the exact posterior for
  /// MLL training, a delta at the deepest block for fixed-depth training.
  std::vector<double> q;
  std::vector<double> posterior;
  double wall_s = 0.0;
};

/// Row 0 describes the model before the first update.
struct RunRecord {
  std::vector<EpochRecord> epochs;

  const EpochRecord& last() const { return epochs.back(); }
};

/// Header `epoch,mll,elbo,loss,q0..qD,wall_s`, 17 significant digits.
void write_run_record_csv(const RunRecord& record, std::ostream& out);
RunRecord read_run_record_csv(std::istream& in);

struct TrainSettings {
  std::size_t epochs = 0;
  /// Zero or >= N means full batch.
  std::size_t batch_size = 0;
  /// VI only: keep q at its initial value for this many epochs.
  std::size_t q_freeze_epochs = 0;
  std::uint64_t seed = 0;
  /// When false the wall_s column is written as 0 so traces are
  /// byte-reproducible.
  bool record_wall_time = false;
};

RunRecord train_dun_vi(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                       const TrainSettings& settings);

/// Minimizes -MLL/N; minibatches use the per-batch MLL with N/B scaling
/// inside the exponent.
RunRecord train_dun_mll(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                        const TrainSettings& settings);

/// Maximum-likelihood training of the deepest subnetwork only.
RunRecord train_vanilla(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                        const TrainSettings& settings);

/// Minibatch index partition for one epoch. A trailing batch of size one is
/// merged into its predecessor (train-mode BN needs two rows).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng);

}  // namespace dun
