// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dun {

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
}

void sgd_step(OptimizerState& state, const ParamBundle& params) {
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const auto& e : params) state.velocity.push_back(Matrix2D::Zero(e.param->value.rows(), e.param->value.cols()));
  }
  const auto& c = state.config;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i].param;
    if (p.frozen) continue;
    if (!p.grad.allFinite()) throw NumericalError("non-finite gradient in " + params[i].name);
    Matrix2D& v = state.velocity[i];
    if (p.decay && c.weight_decay > 0.0) {
      v = c.momentum * v + (p.grad + c.weight_decay * p.value);
    } else {
      v = c.momentum * v + p.grad;
    }
    p.value -= c.lr * v;
  }
}

void write_run_record_csv(const RunRecord& record, std::ostream& out) {
  const std::size_t depths = record.epochs.empty() ? 0 : record.epochs.front().q.size();
  out << "epoch,mll,elbo,loss";
  for (std::size_t i = 0; i < depths; ++i) out << ",q" << i;
  out << ",wall_s\n";
  std::ostringstream row;
  row << std::setprecision(17);
  for (const auto& e : record.epochs) {
    row.str("");
    row << e.epoch << ',' << e.mll << ',' << e.elbo << ',' << e.loss;
    for (double q : e.q) row << ',' << q;
    row << ',' << e.wall_s << '\n';
    out << row.str();
  }
}

RunRecord read_run_record_csv(std::istream& in) {
  RunRecord rec;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 6) throw std::runtime_error("trace header too short");
  const std::size_t depths = columns - 5;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    if (v.size() != columns) throw std::runtime_error("ragged trace row");
    EpochRecord e;
    e.epoch = static_cast<std::size_t>(v[0]);
    e.mll = v[1];
    e.elbo = v[2];
    e.loss = v[3];
    e.q.assign(v.begin() + 4, v.begin() + 4 + static_cast<std::ptrdiff_t>(depths));
    e.wall_s = v.back();
    rec.epochs.push_back(std::move(e));
  }
  return rec;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch_size == 0 || batch_size >= n) return {idx};
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

namespace {

Matrix2D gather_rows(const Matrix2D& m, const std::vector<std::size_t>& idx) {
  Matrix2D out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

enum class Loop { vi, mll, vanilla };

EpochRecord snapshot(const DunModel& model, const Matrix2D& x, const Matrix2D& y, Loop loop, std::size_t epoch,
                     double loss, double wall_s) {
  const LogLikTable table = full_batch_table(model, x, y, Mode::eval);
  if (!table.allFinite())
    throw NumericalError("diverged at epoch " + std::to_string(epoch) + ": non-finite log-likelihood");
  const DepthDistribution q = model.variational();
  const DepthDistribution post = exact_posterior(table, model.prior());
  EpochRecord e;
  e.epoch = epoch;
  e.mll = mll(table, model.prior());
  e.elbo = elbo(table, q, model.prior(), static_cast<std::size_t>(x.rows()));
  e.loss = loss;
  e.posterior.assign(post.probs().begin(), post.probs().end());
  switch (loop) {
    case Loop::vi: e.q.assign(q.probs().begin(), q.probs().end()); break;
    case Loop::mll: e.q = e.posterior; break;
    case Loop::vanilla:
      e.q.assign(model.max_depth() + 1, 0.0);
      e.q.back() = 1.0;
      break;
  }
  if (!std::isfinite(e.mll) || !std::isfinite(e.elbo))
    throw NumericalError("diverged at epoch " + std::to_string(epoch) + ": non-finite objective");
  return e;
}

RunRecord run_loop(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                   const TrainSettings& s, Loop loop) {
  if (x.rows() != y.rows()) throw std::invalid_argument("inputs and targets differ in row count");
  if (x.rows() == 0) throw std::invalid_argument("empty training set");
  const auto n = static_cast<std::size_t>(x.rows());
  if (s.batch_size > n) throw std::invalid_argument("batch size exceeds dataset size");

  Rng shuffle_rng(s.seed);
  Rng dropout_rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return s.record_wall_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() : 0.0;
  };

  ObjectiveOptions obj;
  obj.kind = loop == Loop::vi ? Objective::elbo : loop == Loop::mll ? Objective::mll : Objective::fixed_depth;
  obj.n_total = n;
  obj.forward.mode = Mode::train;
  obj.forward.dropout_rng = model.config().dropout > 0.0 ? &dropout_rng : nullptr;
  obj.with_grad = true;
  obj.update_running_stats = true;

  const bool q_was_frozen = model.variational_logits.frozen;
  RunRecord rec;
  rec.epochs.push_back(snapshot(model, x, y, loop, 0, 0.0, elapsed()));

  const bool full_batch = s.batch_size == 0 || s.batch_size >= n;
  for (std::size_t epoch = 1; epoch <= s.epochs; ++epoch) {
    model.variational_logits.frozen = loop != Loop::vi || epoch <= s.q_freeze_epochs;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& batch : make_batches(n, s.batch_size, shuffle_rng)) {
      try {
        ObjectiveResult r = full_batch ? compute_objective(model, x, y, obj)
                                       : compute_objective(model, gather_rows(x, batch), gather_rows(y, batch), obj);
        loss_sum += r.loss;
        ++loss_count;
        sgd_step(opt, model.params());
      } catch (const NumericalError& e) {
        model.variational_logits.frozen = q_was_frozen;
        throw NumericalError("diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    try {
      rec.epochs.push_back(snapshot(model, x, y, loop, epoch, loss_sum / static_cast<double>(loss_count), elapsed()));
    } catch (const NumericalError&) {
      model.variational_logits.frozen = q_was_frozen;
      throw;
    }
  }
  model.variational_logits.frozen = q_was_frozen;
  return rec;
}

}  // namespace

RunRecord train_dun_vi(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                       const TrainSettings& settings) {
  return run_loop(model, x, y, opt, settings, Loop::vi);
}

RunRecord train_dun_mll(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                        const TrainSettings& settings) {
  return run_loop(model, x, y, opt, settings, Loop::mll);
}

RunRecord train_vanilla(DunModel& model, const Matrix2D& x, const Matrix2D& y, OptimizerState& opt,
                        const TrainSettings& settings) {
  return run_loop(model, x, y, opt, settings, Loop::vanilla);
}

}  // namespace dun
