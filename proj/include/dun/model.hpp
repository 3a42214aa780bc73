// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/nn.hpp"
#include "dun/numerics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dun {

/// Categorical distribution over depths 0..D. logits() are normalized log
/// probabilities (-inf for zero mass).
class DepthDistribution {
 public:
  DepthDistribution() = default;

  static DepthDistribution from_logits(std::vector<double> logits);
  /// Probabilities must be non-negative with a positive sum; they are
  /// renormalized unless already summing to 1 within 1e-12. Zero entries get
  /// -inf logits.
  static DepthDistribution from_probs(std::vector<double> probs);
  static DepthDistribution uniform(std::size_t n);
  static DepthDistribution delta(std::size_t n, std::size_t k);

  std::size_t size() const { return probs_.size(); }
  std::span<const double> logits() const { return logits_; }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> logits_;
  std::vector<double> probs_;
};

/// Per-depth log-likelihoods, rows indexed by depth and columns by datum.
using LogLikTable = Matrix2D;

/// One prediction per depth: [depth][datum x output]. Classification slices
/// hold softmax probabilities; regression slices hold means.
using PerDepthOutputs = std::vector<Matrix2D>;

class DunModel {
 public:
  DunModel() = default;

  /// He-initialized model. The variational logits start equal to the prior
  /// logits; the noise scale starts at 1.
  static DunModel create(const ArchitectureConfig& config, std::uint64_t seed,
                         std::optional<DepthDistribution> prior = std::nullopt);

  /// Correctly shaped model with all parameters zero (BN scales one); used
  /// when restoring from a checkpoint.
  static DunModel zeros(const ArchitectureConfig& config, std::uint64_t seed, DepthDistribution prior);

  const ArchitectureConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t max_depth() const { return config_.max_depth; }

  const DepthDistribution& prior() const { return prior_; }
  DepthDistribution variational() const;
  double noise_std() const;

  /// Parameters in declaration order: input block, hidden blocks, output
  /// block, variational logits, noise log-std (regression only).
  ParamBundle params();

  struct ForwardCache {
    Matrix2D input;
    std::vector<Matrix2D> activations;  // a_0 .. a_k
    std::vector<HiddenBlock::Cache> hidden;
  };

  /// Single pass computing a_0 = f_0(x), a_i = f_i(a_{i-1}) for i <= depth
  /// limit, and the output block applied to every a_i. Never mutates the
  /// model; see train_forward for running-statistic updates.
  PerDepthOutputs forward(const Matrix2D& x, const ForwardOptions& opts, ForwardCache* cache = nullptr,
                          std::optional<std::size_t> depth_limit = std::nullopt) const;

  /// forward() followed by BN running-statistic updates (train mode only).
  PerDepthOutputs train_forward(const Matrix2D& x, const ForwardOptions& opts, ForwardCache& cache,
                                std::optional<std::size_t> depth_limit = std::nullopt);

  /// Back-propagates gradients w.r.t. the per-depth output-block outputs
  /// (pre-softmax logits for classification, means for regression).
  /// `grad_outputs[i]` may be empty to mark a zero gradient.
  void backward(const ForwardCache& cache, const std::vector<Matrix2D>& grad_outputs);

  LinearLayer input_block;
  std::vector<HiddenBlock> hidden_blocks;
  LinearLayer output_block;
  Param variational_logits;  // [1 x D+1]
  Param noise_log_std;       // [1 x 1]

 private:
  ArchitectureConfig config_;
  std::uint64_t seed_ = 0;
  DepthDistribution prior_;
};

/// Row-wise softmax.
Matrix2D softmax_rows(const Matrix2D& logits);

PerDepthOutputs forward_all_depths(const DunModel& model, const Matrix2D& x, Mode mode = Mode::eval);

/// Evaluates only f_0..f_depth followed by the output block, one block at a
/// time (eval mode). Throws std::out_of_range for depth > D.
Matrix2D subnetwork_forward(const DunModel& model, const Matrix2D& x, std::size_t depth);

/// Posterior over depth: probs[j] proportional to prior[j] * exp(sum_n table[j][n]).
DepthDistribution exact_posterior(const LogLikTable& table, const DepthDistribution& prior);

/// Regression predictive mixture: component c has weight weights[c], means
/// means[c] ([N x out]) and observation variance noise_vars[c].
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Matrix2D> means;
  std::vector<double> noise_vars;
};

struct Prediction {
  Task task = Task::regression;
  Matrix2D probs;           // classification: [N x K]
  GaussianMixture mixture;  // regression
};

/// Depth-marginalized prediction. Depths with zero weight are skipped in the
/// mixture, and blocks beyond the last depth with positive weight are never
/// evaluated.
Prediction predict_marginal(const DunModel& model, const Matrix2D& x, const DepthDistribution& weights,
                            ForwardStats* stats = nullptr);

/// Weighted mixture from precomputed per-depth outputs.
Prediction marginalize(Task task, const PerDepthOutputs& outputs, const DepthDistribution& weights,
                       double noise_var);

}  // namespace dun
