// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/model.hpp"

#include <span>
#include <vector>

namespace dun {

/// Categorical likelihoods are floored at this probability.
inline constexpr double kProbabilityFloor = 1e-12;

/// log N(y; mu, sigma^2). Throws std::invalid_argument for sigma <= 0.
double loglik_gaussian(double mu, double y, double sigma);

/// ln max(probs[label], 1e-12). Throws std::out_of_range for a bad label.
double loglik_categorical(std::span<const double> probs, std::size_t label);

/// Per-depth, per-datum log-likelihoods. Regression targets are [N x out]
/// (summed over output dimensions); classification targets are [N x 1]
/// class indices stored as doubles.
LogLikTable loglik_table(Task task, const PerDepthOutputs& outputs, const Matrix2D& targets, double noise_std);

/// log sum_i prior[i] * exp(sum_n table[i][n]).
double mll(const LogLikTable& table, const DepthDistribution& prior);

/// KL(q || p). Throws std::domain_error("infinite KL") when q puts mass where p
/// has none.
double kl_categorical(const DepthDistribution& q, const DepthDistribution& p);

/// (N / B) * sum_n sum_i q[i] table[i][n] - KL(q || prior), B = table columns.
double elbo(const LogLikTable& table, const DepthDistribution& q, const DepthDistribution& prior,
            std::size_t n_total);

/// Same formula as exact_posterior; named for the EM loop.
DepthDistribution em_e_step(const LogLikTable& table, const DepthDistribution& prior);

enum class Objective {
  elbo,         // minibatch ELBO over weights and variational logits
  mll,          // marginal log-likelihood, N/B scaling inside the exponent
  fixed_depth,  // plain likelihood of the deepest subnetwork
  weighted,     // sum_i w_i * loglik_i with fixed depth weights (EM M step)
};

struct ObjectiveOptions {
  Objective kind = Objective::elbo;
  /// Training-set size N; zero means "same as the batch".
  std::size_t n_total = 0;
  /// Depth weights for Objective::weighted.
  std::vector<double> weights;
  ForwardOptions forward;
  bool with_grad = false;
  /// Apply BN running-statistic updates from this pass (train mode only).
  bool update_running_stats = false;
};

struct ObjectiveResult {
  /// Minimized quantity: the negated objective divided by N.
  double loss = 0.0;
  LogLikTable table;
};

/// Evaluates the scaled loss on a batch and, when requested, zeroes and then
/// fills the gradients of model.params().
ObjectiveResult compute_objective(DunModel& model, const Matrix2D& x, const Matrix2D& y,
                                  const ObjectiveOptions& options);

/// Full-batch table in the given BN mode without touching model state.
LogLikTable full_batch_table(const DunModel& model, const Matrix2D& x, const Matrix2D& y, Mode mode = Mode::eval);

/// `steps` plain gradient-ascent updates (learning rate `lr`) of
/// sum_i posterior[i] * sum_n loglik_i / N over all non-frozen parameters
/// except the variational logits; the posterior is held fixed. Throws
/// NumericalError naming the step on divergence.
void em_m_step(DunModel& model, const Matrix2D& x, const Matrix2D& y, const DepthDistribution& posterior,
               std::size_t steps, double lr, Mode mode = Mode::eval);

/// Alternates E and M steps, returning the full-batch MLL before the first
/// iteration and after each one (length iterations + 1).
std::vector<double> run_em(DunModel& model, const Matrix2D& x, const Matrix2D& y, std::size_t iterations,
                           std::size_t m_steps, double lr);

}  // namespace dun
