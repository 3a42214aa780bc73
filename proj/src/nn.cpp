// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/nn.hpp"

#include <cmath>

namespace dun {

std::string to_string(Task t) { return t == Task::regression ? "regression" : "classification"; }

Task parse_task(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw std::invalid_argument("unknown task '" + s + "' (expected regression or classification)");
}

void ArchitectureConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  if (output_dim < 1) throw std::invalid_argument("output_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (task == Task::classification && output_dim < 2)
    throw std::invalid_argument("classification needs output_dim >= 2");
}

Matrix2D LinearLayer::forward(const Matrix2D& a) const {
  if (a.cols() != weight.value.rows())
    throw std::invalid_argument("linear layer expects input width " + std::to_string(weight.value.rows()) +
                                ", got input " + shape_string(a) + " against weight " +
                                shape_string(weight.value));
  Matrix2D out(a.rows(), weight.value.cols());
  out.noalias() = a * weight.value;
  out.rowwise() += bias.value.row(0);
  return out;
}

Matrix2D LinearLayer::backward(const Matrix2D& a, const Matrix2D& grad_out) {
  weight.grad.noalias() += a.transpose() * grad_out;
  bias.grad.row(0) += grad_out.colwise().sum();
  Matrix2D grad_in(a.rows(), a.cols());
  grad_in.noalias() = grad_out * weight.value.transpose();
  return grad_in;
}

Matrix2D HiddenBlock::forward(const Matrix2D& a, const ForwardOptions& opts, Cache* cache) const {
  if (opts.stats) ++opts.stats->hidden_blocks_evaluated;
  Matrix2D pre = linear.forward(a);
  Matrix2D h = pre.cwiseMax(0.0);

  Matrix2D mask;
  if (dropout > 0.0 && opts.dropout_rng) {
    mask = dropout_mask(h.rows(), h.cols(), dropout, *opts.dropout_rng);
    h.array() *= mask.array();
  }

  Matrix2D normalized;
  RowVector inv_std, mean, var;
  if (batchnorm) {
    if (opts.mode == Mode::train) {
      if (h.rows() < 2) throw std::invalid_argument("batch normalization in train mode needs a batch of at least 2");
      const double n = static_cast<double>(h.rows());
      mean = h.colwise().sum() / n;
      Matrix2D centered = h.rowwise() - mean;
      var = centered.array().square().colwise().sum() / n;
      inv_std = (var.array() + kBatchNormEps).rsqrt();
      normalized = centered.array().rowwise() * inv_std.array();
    } else {
      inv_std = (bn.running_var.array() + kBatchNormEps).rsqrt();
      normalized = (h.rowwise() - bn.running_mean).array().rowwise() * inv_std.array();
    }
    h = (normalized.array().rowwise() * bn.scale.value.row(0).array()).rowwise() +
        bn.shift.value.row(0).array();
  }

  if (residual) h += a;

  if (cache) {
    cache->input = a;
    cache->pre = std::move(pre);
    cache->mask = std::move(mask);
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->mode = opts.mode;
  }
  return h;
}

Matrix2D HiddenBlock::backward(const Cache& cache, const Matrix2D& grad_out) {
  Matrix2D g = grad_out;
  if (batchnorm) {
    const auto& xhat = cache.normalized;
    bn.scale.grad.row(0) += (grad_out.array() * xhat.array()).colwise().sum().matrix();
    bn.shift.grad.row(0) += grad_out.colwise().sum();
    Matrix2D dxhat = grad_out.array().rowwise() * bn.scale.value.row(0).array();
    if (cache.mode == Mode::train) {
      const double n = static_cast<double>(grad_out.rows());
      RowVector sum_d = dxhat.colwise().sum();
      RowVector sum_dx = (dxhat.array() * xhat.array()).colwise().sum();
      Matrix2D t = (n * dxhat).rowwise() - sum_d;
      t -= (xhat.array().rowwise() * sum_dx.array()).matrix();
      g = (t.array().rowwise() * (cache.inv_std.array() / n)).matrix();
    } else {
      g = dxhat.array().rowwise() * cache.inv_std.array();
    }
  }
  if (cache.mask.size() > 0) g.array() *= cache.mask.array();
  g.array() *= (cache.pre.array() > 0.0).cast<double>();
  Matrix2D grad_in = linear.backward(cache.input, g);
  if (residual) grad_in += grad_out;
  return grad_in;
}

void HiddenBlock::update_running_stats(const Cache& cache) {
  if (!batchnorm || cache.mode != Mode::train) return;
  bn.running_mean = (1.0 - kBatchNormMomentum) * bn.running_mean + kBatchNormMomentum * cache.batch_mean;
  bn.running_var = (1.0 - kBatchNormMomentum) * bn.running_var + kBatchNormMomentum * cache.batch_var;
}

LinearLayer init_linear_he(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in_dim)));
  Matrix2D w(in_dim, out_dim);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = normal(rng);
  LinearLayer layer;
  layer.weight = Param(std::move(w), true);
  layer.bias = Param(Matrix2D::Zero(1, out_dim), true);
  return layer;
}

HiddenBlock make_hidden_block(const ArchitectureConfig& config, Rng& rng) {
  HiddenBlock block;
  block.linear = init_linear_he(config.width, config.width, rng);
  block.residual = config.residual;
  block.batchnorm = config.batchnorm;
  block.dropout = config.dropout;
  if (config.batchnorm) {
    block.bn.scale = Param(Matrix2D::Ones(1, config.width), false);
    block.bn.shift = Param(Matrix2D::Zero(1, config.width), false);
    block.bn.running_mean = RowVector::Zero(config.width);
    block.bn.running_var = RowVector::Ones(config.width);
  }
  return block;
}

Matrix2D block_forward(HiddenBlock& block, const Matrix2D& a_prev, Mode mode) {
  ForwardOptions opts;
  opts.mode = mode;
  HiddenBlock::Cache cache;
  Matrix2D out = block.forward(a_prev, opts, &cache);
  block.update_running_stats(cache);
  return out;
}

Matrix2D dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
  Matrix2D mask(rows, cols);
  if (p == 0.0) {
    mask.setOnes();
    return mask;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = unif(rng) < p ? 0.0 : keep_scale;
  return mask;
}

Matrix2D dropout_apply(const Matrix2D& a, double p, std::uint64_t seed, Mode mode) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return a;
  Rng rng(seed);
  return (a.array() * dropout_mask(a.rows(), a.cols(), p, rng).array()).matrix();
}

}  // namespace dun
