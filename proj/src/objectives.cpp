// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/objectives.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace dun {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::size_t label_of(double v, std::size_t classes) {
  if (!(v >= 0.0) || v != std::floor(v) || static_cast<std::size_t>(v) >= classes)
    throw std::out_of_range("class label " + std::to_string(v) + " outside [0, " + std::to_string(classes) + ")");
  return static_cast<std::size_t>(v);
}

}  // namespace

double loglik_gaussian(double mu, double y, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian likelihood needs sigma > 0");
  const double r = (y - mu) / sigma;
  return -kHalfLog2Pi - std::log(sigma) - 0.5 * r * r;
}

double loglik_categorical(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size())
    throw std::out_of_range("label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  return std::log(std::max(probs[label], kProbabilityFloor));
}

LogLikTable loglik_table(Task task, const PerDepthOutputs& outputs, const Matrix2D& targets, double noise_std) {
  if (outputs.empty()) throw std::invalid_argument("no outputs");
  const Eigen::Index n = outputs[0].rows();
  if (targets.rows() != n)
    throw std::invalid_argument("targets " + shape_string(targets) + " do not match outputs " + shape_string(outputs[0]));
  LogLikTable table(static_cast<Eigen::Index>(outputs.size()), n);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& out = outputs[i];
    for (Eigen::Index r = 0; r < n; ++r) {
      double ll = 0.0;
      if (task == Task::regression) {
        if (targets.cols() != out.cols()) throw std::invalid_argument("target width does not match output width");
        for (Eigen::Index c = 0; c < out.cols(); ++c) ll += loglik_gaussian(out(r, c), targets(r, c), noise_std);
      } else {
        const std::size_t k = static_cast<std::size_t>(out.cols());
        ll = loglik_categorical(std::span<const double>(out.row(r).data(), k), label_of(targets(r, 0), k));
      }
      table(static_cast<Eigen::Index>(i), r) = ll;
    }
  }
  return table;
}

double mll(const LogLikTable& table, const DepthDistribution& prior) {
  if (static_cast<std::size_t>(table.rows()) != prior.size())
    throw std::invalid_argument("prior length does not match table depth count");
  std::vector<double> terms(prior.size());
  for (std::size_t i = 0; i < prior.size(); ++i)
    terms[i] = prior.logits()[i] + table.row(static_cast<Eigen::Index>(i)).sum();
  return logsumexp(terms);
}

double kl_categorical(const DepthDistribution& q, const DepthDistribution& p) {
  if (q.size() != p.size()) throw std::invalid_argument("KL between distributions of different length");
  const double norm_shift = logsumexp(q.logits()) - logsumexp(p.logits());
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    if (p[i] == 0.0) throw std::domain_error("infinite KL");
    kl += q[i] * (q.logits()[i] - p.logits()[i] - norm_shift);
  }
  return std::max(kl, 0.0);
}

double elbo(const LogLikTable& table, const DepthDistribution& q, const DepthDistribution& prior,
            std::size_t n_total) {
  const auto b = static_cast<std::size_t>(table.cols());
  if (b == 0) throw std::invalid_argument("ELBO of an empty batch");
  if (n_total < b) throw std::invalid_argument("batch larger than the dataset");
  if (static_cast<std::size_t>(table.rows()) != q.size()) throw std::invalid_argument("q length does not match table");
  double expected = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) expected += q[i] * table.row(static_cast<Eigen::Index>(i)).sum();
  const double scale = static_cast<double>(n_total) / static_cast<double>(b);
  return scale * expected - kl_categorical(q, prior);
}

DepthDistribution em_e_step(const LogLikTable& table, const DepthDistribution& prior) {
  return exact_posterior(table, prior);
}

ObjectiveResult compute_objective(DunModel& model, const Matrix2D& x, const Matrix2D& y,
                                  const ObjectiveOptions& options) {
  const auto& config = model.config();
  const std::size_t depths = config.max_depth + 1;
  const auto batch = static_cast<std::size_t>(x.rows());
  const std::size_t n_total = options.n_total == 0 ? batch : options.n_total;
  const double scale = static_cast<double>(n_total) / static_cast<double>(batch);
  const double n = static_cast<double>(n_total);
  const double sigma = model.noise_std();

  DunModel::ForwardCache cache;
  PerDepthOutputs outputs = options.update_running_stats
                                ? model.train_forward(x, options.forward, cache)
                                : model.forward(x, options.forward, options.with_grad ? &cache : nullptr);

  ObjectiveResult result;
  result.table = loglik_table(config.task, outputs, y, sigma);
  const auto& table = result.table;

  std::vector<double> sums(depths);
  for (std::size_t i = 0; i < depths; ++i) sums[i] = table.row(static_cast<Eigen::Index>(i)).sum();

  // Depth weights w_i so that dLoss/dloglik[i][n] = -w_i * scale / N.
  std::vector<double> w(depths, 0.0);
  DepthDistribution q;
  switch (options.kind) {
    case Objective::elbo: {
      q = model.variational();
      result.loss = -elbo(table, q, model.prior(), n_total) / n;
      w.assign(q.probs().begin(), q.probs().end());
      break;
    }
    case Objective::mll: {
      std::vector<double> terms(depths);
      for (std::size_t i = 0; i < depths; ++i) terms[i] = model.prior().logits()[i] + scale * sums[i];
      const double lse = logsumexp(terms);
      result.loss = -lse / n;
      for (std::size_t i = 0; i < depths; ++i) w[i] = std::exp(terms[i] - lse);
      break;
    }
    case Objective::fixed_depth: {
      result.loss = -(scale * sums[depths - 1]) / n;
      w[depths - 1] = 1.0;
      break;
    }
    case Objective::weighted: {
      if (options.weights.size() != depths) throw std::invalid_argument("weighted objective needs one weight per depth");
      double expected = 0.0;
      for (std::size_t i = 0; i < depths; ++i)
        if (options.weights[i] != 0.0) expected += options.weights[i] * sums[i];
      result.loss = -(scale * expected) / n;
      w = options.weights;
      break;
    }
  }
  if (!std::isfinite(result.loss)) throw NumericalError("loss not finite");
  if (!options.with_grad) return result;

  ParamBundle params = model.params();
  params.zero_grad();

  std::vector<Matrix2D> grad_out(depths);
  double noise_grad = 0.0;
  const double inv_var = 1.0 / (sigma * sigma);
  for (std::size_t i = 0; i < depths; ++i) {
    if (w[i] == 0.0) continue;
    const double coef = -(w[i] * scale) / n;  // dLoss / dloglik[i][n]
    const auto& out = outputs[i];
    if (config.task == Task::regression) {
      Matrix2D resid = y - out;
      grad_out[i] = (coef * inv_var) * resid;
      noise_grad += coef * (resid.array().square().sum() * inv_var - static_cast<double>(resid.size()));
    } else {
      const auto k = static_cast<std::size_t>(out.cols());
      Matrix2D g = -out;
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const std::size_t label = label_of(y(r, 0), k);
        if (out(r, static_cast<Eigen::Index>(label)) < kProbabilityFloor) {
          g.row(r).setZero();
        } else {
          g(r, static_cast<Eigen::Index>(label)) += 1.0;
        }
      }
      grad_out[i] = coef * g;
    }
  }
  model.backward(cache, grad_out);
  if (config.task == Task::regression) model.noise_log_std.grad(0, 0) = noise_grad;

  if (options.kind == Objective::elbo) {
    // dLoss/dq_i, then through the softmax parameterization.
    std::vector<double> g(depths);
    double mean_g = 0.0;
    for (std::size_t i = 0; i < depths; ++i) {
      g[i] = -(scale * sums[i]) / n;
      if (q[i] > 0.0) {
        if (model.prior()[i] == 0.0) throw std::domain_error("infinite KL");
        g[i] += (std::log(q[i]) - std::log(model.prior()[i]) + 1.0) / n;
      }
      mean_g += q[i] * g[i];
    }
    for (std::size_t i = 0; i < depths; ++i)
      model.variational_logits.grad(0, static_cast<Eigen::Index>(i)) = q[i] * (g[i] - mean_g);
  }
  return result;
}

LogLikTable full_batch_table(const DunModel& model, const Matrix2D& x, const Matrix2D& y, Mode mode) {
  ForwardOptions opts;
  opts.mode = mode;
  return loglik_table(model.config().task, model.forward(x, opts), y, model.noise_std());
}

void em_m_step(DunModel& model, const Matrix2D& x, const Matrix2D& y, const DepthDistribution& posterior,
               std::size_t steps, double lr, Mode mode) {
  ObjectiveOptions opts;
  opts.kind = Objective::weighted;
  opts.weights.assign(posterior.probs().begin(), posterior.probs().end());
  opts.forward.mode = mode;
  opts.with_grad = true;
  for (std::size_t s = 0; s < steps; ++s) {
    ObjectiveResult r;
    try {
      r = compute_objective(model, x, y, opts);
    } catch (const NumericalError&) {
      throw NumericalError("M step diverged at step " + std::to_string(s));
    }
    ParamBundle params = model.params();
    for (const auto& e : params) {
      if (e.param->frozen || e.param == &model.variational_logits) continue;
      if (!e.param->grad.allFinite()) throw NumericalError("M step diverged at step " + std::to_string(s));
      e.param->value -= lr * e.param->grad;
    }
  }
}

std::vector<double> run_em(DunModel& model, const Matrix2D& x, const Matrix2D& y, std::size_t iterations,
                           std::size_t m_steps, double lr) {
  std::vector<double> trace;
  LogLikTable table = full_batch_table(model, x, y);
  trace.push_back(mll(table, model.prior()));
  for (std::size_t it = 0; it < iterations; ++it) {
    const DepthDistribution post = em_e_step(table, model.prior());
    em_m_step(model, x, y, post, m_steps, lr);
    table = full_batch_table(model, x, y);
    trace.push_back(mll(table, model.prior()));
  }
  return trace;
}

}  // namespace dun
