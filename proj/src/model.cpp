// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dun {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

DepthDistribution DepthDistribution::from_logits(std::vector<double> logits) {
  if (logits.empty()) throw std::invalid_argument("depth distribution needs at least one entry");
  for (double l : logits)
    if (std::isnan(l) || l == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("depth logits must be finite or -inf");
  const double lse = logsumexp(logits);
  if (lse == kNegInf) throw std::invalid_argument("depth distribution has zero total mass");
  DepthDistribution d;
  d.probs_ = softmax(logits);
  for (double& l : logits) l -= lse;
  d.logits_ = std::move(logits);
  return d;
}

DepthDistribution DepthDistribution::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("depth distribution needs at least one entry");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("depth probabilities must be finite and >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw std::invalid_argument("depth distribution has zero total mass");
  // Already-normalized input is kept bit-for-bit.
  const bool rescale = std::abs(total - 1.0) > 1e-12;
  DepthDistribution d;
  d.logits_.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (rescale) probs[i] /= total;
    d.logits_[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
  }
  d.probs_ = std::move(probs);
  return d;
}

DepthDistribution DepthDistribution::uniform(std::size_t n) {
  return from_logits(std::vector<double>(n, 0.0));
}

DepthDistribution DepthDistribution::delta(std::size_t n, std::size_t k) {
  if (k >= n) throw std::out_of_range("delta index out of range");
  std::vector<double> p(n, 0.0);
  p[k] = 1.0;
  return from_probs(std::move(p));
}

DunModel DunModel::create(const ArchitectureConfig& config, std::uint64_t seed,
                          std::optional<DepthDistribution> prior) {
  config.validate();
  DunModel m;
  m.config_ = config;
  m.seed_ = seed;
  m.prior_ = prior ? std::move(*prior) : DepthDistribution::uniform(config.max_depth + 1);
  if (m.prior_.size() != config.max_depth + 1)
    throw std::invalid_argument("prior length must equal max_depth + 1");

  Rng rng(seed);
  m.input_block = init_linear_he(config.input_dim, config.width, rng);
  m.hidden_blocks.reserve(config.max_depth);
  for (std::size_t i = 0; i < config.max_depth; ++i) m.hidden_blocks.push_back(make_hidden_block(config, rng));
  m.output_block = init_linear_he(config.width, config.output_dim, rng);

  // Start q at the prior. -inf prior logits are clamped so q stays trainable.
  Matrix2D logits(1, config.max_depth + 1);
  for (std::size_t i = 0; i <= config.max_depth; ++i)
    logits(0, static_cast<Eigen::Index>(i)) = std::max(m.prior_.logits()[i], -1e3);
  m.variational_logits = Param(std::move(logits), false);
  m.noise_log_std = Param(Matrix2D::Zero(1, 1), false);
  return m;
}

DunModel DunModel::zeros(const ArchitectureConfig& config, std::uint64_t seed, DepthDistribution prior) {
  config.validate();
  DunModel m;
  m.config_ = config;
  m.seed_ = seed;
  if (prior.size() != config.max_depth + 1) throw std::invalid_argument("prior length must equal max_depth + 1");
  m.prior_ = std::move(prior);
  auto zero_linear = [](std::size_t in, std::size_t out) {
    LinearLayer l;
    l.weight = Param(Matrix2D::Zero(in, out), true);
    l.bias = Param(Matrix2D::Zero(1, out), true);
    return l;
  };
  m.input_block = zero_linear(config.input_dim, config.width);
  for (std::size_t i = 0; i < config.max_depth; ++i) {
    HiddenBlock b;
    b.linear = zero_linear(config.width, config.width);
    b.residual = config.residual;
    b.batchnorm = config.batchnorm;
    b.dropout = config.dropout;
    if (config.batchnorm) {
      b.bn.scale = Param(Matrix2D::Ones(1, config.width), false);
      b.bn.shift = Param(Matrix2D::Zero(1, config.width), false);
      b.bn.running_mean = RowVector::Zero(config.width);
      b.bn.running_var = RowVector::Ones(config.width);
    }
    m.hidden_blocks.push_back(std::move(b));
  }
  m.output_block = zero_linear(config.width, config.output_dim);
  m.variational_logits = Param(Matrix2D::Zero(1, config.max_depth + 1), false);
  m.noise_log_std = Param(Matrix2D::Zero(1, 1), false);
  return m;
}

DepthDistribution DunModel::variational() const {
  const auto& v = variational_logits.value;
  return DepthDistribution::from_logits(std::vector<double>(v.data(), v.data() + v.size()));
}

double DunModel::noise_std() const { return std::exp(noise_log_std.value(0, 0)); }

ParamBundle DunModel::params() {
  ParamBundle b;
  b.add("input.weight", input_block.weight);
  b.add("input.bias", input_block.bias);
  for (std::size_t i = 0; i < hidden_blocks.size(); ++i) {
    auto& h = hidden_blocks[i];
    const std::string prefix = "hidden" + std::to_string(i + 1) + ".";
    b.add(prefix + "weight", h.linear.weight);
    b.add(prefix + "bias", h.linear.bias);
    if (h.batchnorm) {
      b.add(prefix + "bn_scale", h.bn.scale);
      b.add(prefix + "bn_shift", h.bn.shift);
    }
  }
  b.add("output.weight", output_block.weight);
  b.add("output.bias", output_block.bias);
  b.add("variational_logits", variational_logits);
  if (config_.task == Task::regression) b.add("noise_log_std", noise_log_std);
  return b;
}

Matrix2D softmax_rows(const Matrix2D& logits) {
  Matrix2D out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

PerDepthOutputs DunModel::forward(const Matrix2D& x, const ForwardOptions& opts, ForwardCache* cache,
                                  std::optional<std::size_t> depth_limit) const {
  const std::size_t limit = depth_limit.value_or(config_.max_depth);
  if (limit > config_.max_depth) throw std::out_of_range("depth limit exceeds max depth");
  if (static_cast<std::size_t>(x.cols()) != config_.input_dim)
    throw std::invalid_argument("input has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(config_.input_dim) + " (input " + shape_string(x) + ")");

  PerDepthOutputs outputs;
  outputs.reserve(limit + 1);
  auto emit = [&](const Matrix2D& a) {
    Matrix2D z = output_block.forward(a);
    outputs.push_back(config_.task == Task::classification ? softmax_rows(z) : std::move(z));
  };

  if (cache) {
    cache->input = x;
    cache->activations.clear();
    cache->hidden.assign(limit, {});
    cache->activations.push_back(input_block.forward(x));
    emit(cache->activations.back());
    for (std::size_t i = 0; i < limit; ++i) {
      cache->activations.push_back(hidden_blocks[i].forward(cache->activations.back(), opts, &cache->hidden[i]));
      emit(cache->activations.back());
    }
  } else {
    Matrix2D a = input_block.forward(x);
    emit(a);
    for (std::size_t i = 0; i < limit; ++i) {
      a = hidden_blocks[i].forward(a, opts);
      emit(a);
    }
  }
  return outputs;
}

PerDepthOutputs DunModel::train_forward(const Matrix2D& x, const ForwardOptions& opts, ForwardCache& cache,
                                        std::optional<std::size_t> depth_limit) {
  PerDepthOutputs out = forward(x, opts, &cache, depth_limit);
  if (opts.mode == Mode::train)
    for (std::size_t i = 0; i < cache.hidden.size(); ++i) hidden_blocks[i].update_running_stats(cache.hidden[i]);
  return out;
}

void DunModel::backward(const ForwardCache& cache, const std::vector<Matrix2D>& grad_outputs) {
  const std::size_t depths = cache.activations.size();
  if (grad_outputs.size() != depths)
    throw std::invalid_argument("backward expects one output gradient per evaluated depth");
  Matrix2D carry;  // gradient flowing into a_i from deeper blocks
  for (std::size_t i = depths; i-- > 0;) {
    Matrix2D g;
    if (grad_outputs[i].size() > 0) g = output_block.backward(cache.activations[i], grad_outputs[i]);
    if (carry.size() > 0) g = g.size() > 0 ? Matrix2D(g + carry) : std::move(carry);
    if (i == 0) {
      if (g.size() > 0) input_block.backward(cache.input, g);
      break;
    }
    carry = g.size() > 0 ? hidden_blocks[i - 1].backward(cache.hidden[i - 1], g) : Matrix2D();
  }
}

PerDepthOutputs forward_all_depths(const DunModel& model, const Matrix2D& x, Mode mode) {
  ForwardOptions opts;
  opts.mode = mode;
  return model.forward(x, opts);
}

Matrix2D subnetwork_forward(const DunModel& model, const Matrix2D& x, std::size_t depth) {
  if (depth > model.max_depth())
    throw std::out_of_range("depth " + std::to_string(depth) + " exceeds max depth " +
                            std::to_string(model.max_depth()));
  ForwardOptions opts;
  Matrix2D a = model.input_block.forward(x);
  for (std::size_t i = 0; i < depth; ++i) a = model.hidden_blocks[i].forward(a, opts);
  Matrix2D z = model.output_block.forward(a);
  return model.config().task == Task::classification ? softmax_rows(z) : z;
}

DepthDistribution exact_posterior(const LogLikTable& table, const DepthDistribution& prior) {
  if (static_cast<std::size_t>(table.rows()) != prior.size())
    throw std::invalid_argument("log-likelihood table has " + std::to_string(table.rows()) +
                                " depths, prior has " + std::to_string(prior.size()));
  if (!table.allFinite()) throw std::invalid_argument("log-likelihood table must be finite");
  std::vector<double> terms(prior.size());
  for (std::size_t j = 0; j < prior.size(); ++j)
    terms[j] = prior.logits()[j] + table.row(static_cast<Eigen::Index>(j)).sum();
  const double lse = logsumexp(terms);
  if (lse == kNegInf) throw std::invalid_argument("prior has zero mass everywhere");
  for (double& t : terms) t -= lse;
  return DepthDistribution::from_logits(std::move(terms));
}

Prediction marginalize(Task task, const PerDepthOutputs& outputs, const DepthDistribution& weights,
                       double noise_var) {
  Prediction pred;
  pred.task = task;
  if (outputs.empty()) throw std::invalid_argument("no per-depth outputs to marginalize");
  if (task == Task::classification) {
    // Accumulate deviations from the heaviest component so that a delta
    // weighting or identical outputs are reproduced exactly.
    const std::size_t n = std::min(outputs.size(), weights.size());
    std::size_t ref = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (weights[i] > weights[ref]) ref = i;
    pred.probs = outputs[ref];
    for (std::size_t i = 0; i < n; ++i)
      if (i != ref && weights[i] > 0.0) pred.probs += weights[i] * (outputs[i] - outputs[ref]);
  } else {
    for (std::size_t i = 0; i < outputs.size() && i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      pred.mixture.weights.push_back(weights[i]);
      pred.mixture.means.push_back(outputs[i]);
      pred.mixture.noise_vars.push_back(noise_var);
    }
  }
  return pred;
}

Prediction predict_marginal(const DunModel& model, const Matrix2D& x, const DepthDistribution& weights,
                            ForwardStats* stats) {
  if (weights.size() != model.max_depth() + 1)
    throw std::invalid_argument("depth weights must have length max_depth + 1");
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) last = i;
  ForwardOptions opts;
  opts.stats = stats;
  const auto outputs = model.forward(x, opts, nullptr, last);
  const double sigma = model.noise_std();
  return marginalize(model.config().task, outputs, weights, sigma * sigma);
}

}  // namespace dun
