// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dun {

/// Dense row-major matrix of doubles. Rows index data points, columns
/// index features.
using Matrix2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using Rng = std::mt19937_64;

/// Raised when a computation produces non-finite values (divergence,
/// overflow). The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// log(sum(exp(terms))) with max-subtraction. Returns -inf when every term
/// is -inf. Throws std::invalid_argument("empty reduction") on empty input.
double logsumexp(std::span<const double> terms);

/// Normalized exponentials of `logits`; -inf logits map to exactly 0.
std::vector<double> softmax(std::span<const double> logits);

bool all_finite(const Matrix2D& m);

std::string shape_string(const Matrix2D& m);

/// A trainable tensor and its gradient accumulator.
struct Param {
  Matrix2D value;
  Matrix2D grad;
  /// Whether weight decay applies (false for normalization parameters,
  /// variational logits and the noise scale).
  bool decay = true;
  /// Frozen parameters are skipped by optimizers and gradient checks.
  bool frozen = false;

  Param() = default;
  Param(Matrix2D v, bool decay_enabled)
      : value(std::move(v)), grad(Matrix2D::Zero(value.rows(), value.cols())), decay(decay_enabled) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Non-owning, ordered view over the named parameters of a model. Becomes
/// invalid if the owning model is moved or destroyed.
class ParamBundle {
 public:
  struct Entry {
    std::string name;
    Param* param;
  };

  void add(std::string name, Param& p) { entries_.push_back({std::move(name), &p}); }
  void zero_grad();

  std::size_t size() const { return entries_.size(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Throws std::out_of_range when absent.
  Param& find(const std::string& name) const;

  std::size_t scalar_count() const;

 private:
  std::vector<Entry> entries_;
};

/// A scalar loss over a ParamBundle. Called with `with_grad = true` it must
/// zero and then populate the bundle's gradients.
using LossFunction = std::function<double(bool with_grad)>;

/// Compares analytic gradients against central finite differences over all
/// non-frozen tensors: ||analytic - numeric|| / (||numeric|| + 1e-8), with
/// Euclidean norms over the concatenated gradient vector.
/// Throws NumericalError("loss not finite") if the loss is not finite.
double grad_check(const LossFunction& loss, const ParamBundle& params, double eps = 1e-5);

/// The same ratio computed per tensor, in bundle order; frozen tensors
/// report 0.
std::vector<double> grad_check_per_tensor(const LossFunction& loss, const ParamBundle& params,
                                          double eps = 1e-5);

}  // namespace dun
