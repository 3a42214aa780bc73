// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/numerics.hpp"

#include <cstdint>
#include <string>

namespace dun {

enum class Task { regression, classification };

std::string to_string(Task t);
Task parse_task(const std::string& s);

struct ArchitectureConfig {
  std::size_t input_dim = 1;
  std::size_t width = 100;
  /// Number of intermediate blocks D. Zero gives input block -> output block.
  std::size_t max_depth = 0;
  std::size_t output_dim = 1;
  bool residual = true;
  bool batchnorm = true;
  /// Dropout probability after each hidden nonlinearity; 0 disables it.
  double dropout = 0.0;
  Task task = Task::regression;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Batch normalization runs in batch-statistics mode (train) or with the
/// running estimates (eval).
enum class Mode { train, eval };

struct ForwardStats {
  std::size_t hidden_blocks_evaluated = 0;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  /// Source of dropout masks. Dropout is active iff this is non-null and the
  /// block's rate is positive, in either mode (eval + rng is MC dropout).
  Rng* dropout_rng = nullptr;
  ForwardStats* stats = nullptr;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Affine map a -> a W + b, W of shape [in x out].
struct LinearLayer {
  Param weight;
  Param bias;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.value.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.value.cols()); }

  Matrix2D forward(const Matrix2D& a) const;
  /// Accumulates parameter gradients; returns the gradient w.r.t. `a`.
  Matrix2D backward(const Matrix2D& a, const Matrix2D& grad_out);
};

struct BatchNorm {
  Param scale;
  Param shift;
  RowVector running_mean;
  RowVector running_var;
};

/// Intermediate block: [a +] BN(dropout(ReLU(a W + b))).
struct HiddenBlock {
  LinearLayer linear;
  bool residual = true;
  bool batchnorm = true;
  double dropout = 0.0;
  BatchNorm bn;

  struct Cache {
    Matrix2D input;
    Matrix2D pre;         // a W + b
    Matrix2D mask;        // dropout keep-mask scaled by 1/(1-p); empty when inactive
    Matrix2D normalized;  // x-hat of BN; empty without BN
    RowVector inv_std;
    RowVector batch_mean;  // train mode with BN only
    RowVector batch_var;
    Mode mode = Mode::eval;
  };

  /// Never mutates the block; train-mode batch statistics are left in the
  /// cache for update_running_stats. Train mode with BN needs at least two
  /// rows. Throws std::invalid_argument on shape mismatch (message carries
  /// both shapes).
  Matrix2D forward(const Matrix2D& a, const ForwardOptions& opts, Cache* cache = nullptr) const;
  Matrix2D backward(const Cache& cache, const Matrix2D& grad_out);

  /// Exponential moving average (momentum 0.1) towards the batch statistics
  /// recorded in a train-mode cache. No-op for eval caches or without BN.
  void update_running_stats(const Cache& cache);
};

/// He-initialized layer: weights ~ N(0, 2 / fan_in), zero bias.
LinearLayer init_linear_he(std::size_t in_dim, std::size_t out_dim, Rng& rng);

HiddenBlock make_hidden_block(const ArchitectureConfig& config, Rng& rng);

/// Forward through one block; in train mode the running statistics are
/// updated from the batch.
Matrix2D block_forward(HiddenBlock& block, const Matrix2D& a_prev, Mode mode);

/// Inverted dropout. In train mode each entry is zeroed with probability p and
/// survivors scaled by 1/(1-p); eval mode is the identity. Throws for p
/// outside [0, 1).
Matrix2D dropout_apply(const Matrix2D& a, double p, std::uint64_t seed, Mode mode);

/// Keep-mask (0 or 1/(1-p)) drawn from `rng`.
Matrix2D dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng);

}  // namespace dun
