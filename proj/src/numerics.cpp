// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dun {

double logsumexp(std::span<const double> terms) {
  if (terms.empty()) throw std::invalid_argument("empty reduction");
  const double m = *std::max_element(terms.begin(), terms.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = logsumexp(logits);
  if (!std::isfinite(lse)) throw std::invalid_argument("softmax of all -inf logits");
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
  return out;
}

bool all_finite(const Matrix2D& m) { return m.allFinite(); }

std::string shape_string(const Matrix2D& m) {
  std::ostringstream os;
  os << "[" << m.rows() << " x " << m.cols() << "]";
  return os.str();
}

void ParamBundle::zero_grad() {
  for (auto& e : entries_) e.param->zero_grad();
}

Param& ParamBundle::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return *e.param;
  throw std::out_of_range("no parameter named " + name);
}

std::size_t ParamBundle::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.param->value.size());
  return n;
}

namespace {

struct Differences {
  std::vector<Matrix2D> analytic;
  std::vector<Matrix2D> numeric;  // empty for frozen tensors
};

Differences central_differences(const LossFunction& loss, const ParamBundle& params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check eps must lie in [1e-7, 1e-3]");
  const double base = loss(true);
  if (!std::isfinite(base)) throw NumericalError("loss not finite");

  Differences d;
  d.analytic.reserve(params.size());
  for (const auto& e : params) d.analytic.push_back(e.param->grad);
  d.numeric.resize(params.size());
  for (std::size_t t = 0; t < params.size(); ++t) {
    Param& p = *params[t].param;
    if (p.frozen) continue;
    Matrix2D numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& v = p.value.data()[k];
      const double saved = v;
      v = saved + eps;
      const double up = loss(false);
      v = saved - eps;
      const double down = loss(false);
      v = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw NumericalError("loss not finite");
      numeric.data()[k] = (up - down) / (2.0 * eps);
    }
    d.numeric[t] = std::move(numeric);
  }
  // Leave the bundle holding the analytic gradient at the unperturbed point.
  for (std::size_t t = 0; t < params.size(); ++t) params[t].param->grad = d.analytic[t];
  return d;
}

}  // namespace

std::vector<double> grad_check_per_tensor(const LossFunction& loss, const ParamBundle& params, double eps) {
  const Differences d = central_differences(loss, params, eps);
  std::vector<double> errors(params.size(), 0.0);
  for (std::size_t t = 0; t < params.size(); ++t)
    if (d.numeric[t].size() > 0) errors[t] = (d.analytic[t] - d.numeric[t]).norm() / (d.numeric[t].norm() + 1e-8);
  return errors;
}

double grad_check(const LossFunction& loss, const ParamBundle& params, double eps) {
  const Differences d = central_differences(loss, params, eps);
  double diff = 0.0, norm = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (d.numeric[t].size() == 0) continue;
    diff += (d.analytic[t] - d.numeric[t]).squaredNorm();
    norm += d.numeric[t].squaredNorm();
  }
  return std::sqrt(diff) / (std::sqrt(norm) + 1e-8);
}

}  // namespace dun
