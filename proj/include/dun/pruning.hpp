// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/model.hpp"

#include <string>

namespace dun {

enum class PruneKind { argmax, percentile95, expected };

struct PruneStrategy {
  PruneKind kind = PruneKind::argmax;
  /// Fraction of the maximum probability for PruneKind::percentile95.
  double threshold = 0.95;
};

std::string to_string(PruneKind k);
PruneStrategy parse_prune_strategy(const std::string& s);

/// argmax: smallest index attaining the maximum. percentile95: smallest i with
/// q_i >= threshold * max q. expected: round-half-up of sum i q_i.
std::size_t select_depth(const DepthDistribution& q, const PruneStrategy& strategy);

/// Folds q(d >= d_opt) onto d_opt and zeroes deeper entries.
DepthDistribution truncate_posterior(const DepthDistribution& q, std::size_t d_opt);

/// Marginal prediction over depths 0..d_opt with the truncated weights; blocks
/// beyond d_opt are never evaluated.
Prediction predict_truncated(const DunModel& model, const Matrix2D& x, std::size_t d_opt,
                             ForwardStats* stats = nullptr);

}  // namespace dun
