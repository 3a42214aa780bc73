// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/pruning.hpp"

#include <algorithm>
#include <cmath>

namespace dun {

std::string to_string(PruneKind k) {
  switch (k) {
    case PruneKind::argmax: return "argmax";
    case PruneKind::percentile95: return "percentile95";
    case PruneKind::expected: return "expected";
  }
  return "?";
}

PruneStrategy parse_prune_strategy(const std::string& s) {
  if (s == "argmax") return {PruneKind::argmax};
  if (s == "percentile95") return {PruneKind::percentile95};
  if (s == "expected") return {PruneKind::expected};
  throw std::invalid_argument("unknown prune strategy '" + s + "' (expected argmax, percentile95 or expected)");
}

std::size_t select_depth(const DepthDistribution& q, const PruneStrategy& strategy) {
  if (q.size() == 0) throw std::invalid_argument("empty depth distribution");
  const auto probs = q.probs();
  switch (strategy.kind) {
    case PruneKind::argmax:
      // max_element returns the first maximum.
      return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    case PruneKind::percentile95: {
      if (!(strategy.threshold > 0.0 && strategy.threshold <= 1.0))
        throw std::invalid_argument("prune threshold must lie in (0, 1]");
      const double cut = strategy.threshold * *std::max_element(probs.begin(), probs.end());
      for (std::size_t i = 0; i < probs.size(); ++i)
        if (probs[i] >= cut) return i;
      return probs.size() - 1;
    }
    case PruneKind::expected: {
      double mean = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) mean += static_cast<double>(i) * probs[i];
      return std::min(static_cast<std::size_t>(std::floor(mean + 0.5)), probs.size() - 1);
    }
  }
  return 0;
}

DepthDistribution truncate_posterior(const DepthDistribution& q, std::size_t d_opt) {
  if (d_opt >= q.size()) throw std::out_of_range("d_opt exceeds max depth");
  std::vector<double> p(q.probs().begin(), q.probs().end());
  double tail = 0.0;
  for (std::size_t i = d_opt; i < p.size(); ++i) {
    tail += p[i];
    p[i] = 0.0;
  }
  p[d_opt] = tail;
  return DepthDistribution::from_probs(std::move(p));
}

Prediction predict_truncated(const DunModel& model, const Matrix2D& x, std::size_t d_opt, ForwardStats* stats) {
  const DepthDistribution q = truncate_posterior(model.variational(), d_opt);
  ForwardOptions opts;
  opts.stats = stats;
  const auto outputs = model.forward(x, opts, nullptr, d_opt);
  const double sigma = model.noise_std();
  return marginalize(model.config().task, outputs, q, sigma * sigma);
}

}  // namespace dun
