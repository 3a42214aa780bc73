// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/metrics.hpp"

#include "dun/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dun {

namespace {

std::size_t heaviest(std::span<const double> weights) {
  return static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
}

PredictiveGaussian match_means(std::span<const double> weights, std::span<const double> means, double noise_term) {
  if (weights.size() != means.size() || weights.empty())
    throw std::invalid_argument("moment_match needs equally sized, non-empty weights and means");
  // Deviations from the heaviest component keep identical means exact.
  const std::size_t ref = heaviest(weights);
  double mean = means[ref];
  for (std::size_t i = 0; i < means.size(); ++i)
    if (i != ref) mean += weights[i] * (means[i] - means[ref]);
  double spread = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) spread += weights[i] * (means[i] - mean) * (means[i] - mean);
  PredictiveGaussian g;
  g.mean = mean;
  g.model_term = std::max(spread, 0.0);
  g.noise_term = noise_term;
  g.variance = g.model_term + g.noise_term;
  return g;
}

std::size_t bin_index(double v, std::size_t bins) {
  const double s = static_cast<double>(bins);
  auto b = std::min(static_cast<std::size_t>(std::max(std::floor(v * s), 0.0)), bins - 1);
  // v * s can round across an edge; settle against the edges b / s themselves.
  while (b + 1 < bins && v >= static_cast<double>(b + 1) / s) ++b;
  while (b > 0 && v < static_cast<double>(b) / s) --b;
  return b;
}

std::string fmt(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

}  // namespace

PredictiveGaussian moment_match(std::span<const double> weights, std::span<const double> means, double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be > 0");
  return match_means(weights, means, noise_var);
}

PredictiveGaussian moment_match(std::span<const double> weights, std::span<const double> means,
                                std::span<const double> noise_vars) {
  if (noise_vars.size() != weights.size()) throw std::invalid_argument("one noise variance per component required");
  for (double v : noise_vars)
    if (!(v > 0.0)) throw std::invalid_argument("noise variance must be > 0");
  const bool shared = std::all_of(noise_vars.begin(), noise_vars.end(), [&](double v) { return v == noise_vars[0]; });
  double noise = noise_vars[0];
  if (!shared) {
    noise = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) noise += weights[i] * noise_vars[i];
  }
  return match_means(weights, means, noise);
}

std::vector<PredictiveGaussian> moment_match_all(const GaussianMixture& mixture, Eigen::Index column) {
  if (mixture.means.empty()) throw std::invalid_argument("empty mixture");
  const Eigen::Index n = mixture.means[0].rows();
  std::vector<PredictiveGaussian> out(static_cast<std::size_t>(n));
  std::vector<double> means(mixture.means.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < means.size(); ++c) means[c] = mixture.means[c](r, column);
    out[static_cast<std::size_t>(r)] = moment_match(mixture.weights, means, mixture.noise_vars);
  }
  return out;
}

double predictive_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

double normal_cdf(double y, double mean, double variance) {
  return 0.5 * std::erfc(-(y - mean) / std::sqrt(2.0 * variance));
}

double tce(std::span<const double> cdf_values, double tau) {
  if (!(tau > 0.0 && tau < 0.5)) throw std::invalid_argument("tau must lie in (0, 0.5)");
  if (cdf_values.empty()) throw std::invalid_argument("tce of an empty set");
  std::size_t low = 0, high = 0;
  for (double v : cdf_values) {
    if (v < tau) ++low;
    if (v >= 1.0 - tau) ++high;
  }
  if (low + high == 0) return 0.0;
  const double n = static_cast<double>(cdf_values.size());
  const double tails = static_cast<double>(low + high);
  double err = 0.0;
  for (std::size_t count : {low, high}) {
    const double c = static_cast<double>(count);
    err += (c / tails) * std::abs(tau - c / n);
  }
  return err;
}

double rce(std::span<const double> cdf_values, std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("rce needs at least two bins");
  if (cdf_values.empty()) throw std::invalid_argument("rce of an empty set");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : cdf_values) ++counts[bin_index(v, bins)];
  const double n = static_cast<double>(cdf_values.size());
  const double target = 1.0 / static_cast<double>(bins);
  double err = 0.0;
  for (std::size_t c : counts) err += (static_cast<double>(c) / n) * std::abs(target - static_cast<double>(c) / n);
  return err;
}

double brier(const Matrix2D& probs, std::span<const std::size_t> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || labels.empty())
    throw std::invalid_argument("brier needs one label per probability row");
  const double k = static_cast<double>(probs.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double row = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double t = static_cast<std::size_t>(c) == labels[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
      row += (probs(r, c) - t) * (probs(r, c) - t);
    }
    total += row / k;
  }
  return total / static_cast<double>(probs.rows());
}

double ece(const Matrix2D& probs, std::span<const std::size_t> labels, std::size_t bins) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || labels.empty())
    throw std::invalid_argument("ece needs one label per probability row");
  if (bins < 1) throw std::invalid_argument("ece needs at least one bin");
  std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
  std::vector<std::size_t> counts(bins, 0);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index arg = 0;
    const double conf = probs.row(r).maxCoeff(&arg);
    const std::size_t b = bin_index(conf, bins);
    conf_sum[b] += conf;
    acc_sum[b] += static_cast<std::size_t>(arg) == labels[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
    ++counts[b];
  }
  const double n = static_cast<double>(probs.rows());
  double err = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (counts[b] == 0) continue;
    const double c = static_cast<double>(counts[b]);
    err += (c / n) * std::abs(acc_sum[b] / c - conf_sum[b] / c);
  }
  return err;
}

std::vector<RejectionPoint> rejection_curve(std::span<const double> entropies, std::span<const bool> correct,
                                            std::span<const double> fractions) {
  if (entropies.size() != correct.size()) throw std::invalid_argument("entropies and correctness flags differ in length");
  const std::size_t n = entropies.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entropies[a] > entropies[b]; });
  // suffix_correct[k] = number of correct points among order[k..n).
  std::vector<std::size_t> suffix_correct(n + 1, 0);
  for (std::size_t k = n; k-- > 0;) suffix_correct[k] = suffix_correct[k + 1] + (correct[order[k]] ? 1 : 0);

  std::vector<RejectionPoint> curve;
  for (double r : fractions) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("rejection fraction must lie in [0, 1]");
    // Guard against products such as 0.7 * 10 = 7.000000000000001.
    const auto rejected = std::min(n, static_cast<std::size_t>(std::ceil(r * static_cast<double>(n) - 1e-9)));
    const std::size_t kept = n - rejected;
    const double acc = kept == 0 ? 1.0 : static_cast<double>(suffix_correct[rejected]) / static_cast<double>(kept);
    curve.push_back({r, acc});
  }
  return curve;
}

CalibrationReport evaluate_regression(std::span<const PredictiveGaussian> predictive, std::span<const double> targets,
                                      double tau, std::size_t bins) {
  if (predictive.size() != targets.size() || targets.empty())
    throw std::invalid_argument("one predictive distribution per target required");
  const double n = static_cast<double>(targets.size());
  double ll = 0.0, se = 0.0;
  std::vector<double> cdf(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& g = predictive[i];
    ll += loglik_gaussian(g.mean, targets[i], std::sqrt(g.variance));
    se += (targets[i] - g.mean) * (targets[i] - g.mean);
    cdf[i] = normal_cdf(targets[i], g.mean, g.variance);
  }
  CalibrationReport rep;
  rep.bins = bins;
  rep.ll = ll / n;
  rep.rmse = std::sqrt(se / n);
  rep.tce = tce(cdf, tau);
  rep.rce = rce(cdf, bins);
  return rep;
}

CalibrationReport evaluate_classification(const Matrix2D& probs, std::span<const std::size_t> labels,
                                          std::size_t bins) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || labels.empty())
    throw std::invalid_argument("one label per probability row required");
  double ll = 0.0;
  std::size_t wrong = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const std::size_t y = labels[static_cast<std::size_t>(r)];
    ll += loglik_categorical(std::span<const double>(probs.row(r).data(), static_cast<std::size_t>(probs.cols())), y);
    Eigen::Index arg = 0;
    probs.row(r).maxCoeff(&arg);
    if (static_cast<std::size_t>(arg) != y) ++wrong;
  }
  CalibrationReport rep;
  rep.bins = bins;
  rep.ll = ll / static_cast<double>(labels.size());
  rep.brier = brier(probs, labels);
  rep.ece = ece(probs, labels, bins);
  rep.err = static_cast<double>(wrong) / static_cast<double>(labels.size());
  return rep;
}

void write_report_row(std::ostream& out, const std::string& method, const std::string& dataset, std::uint64_t seed,
                      const CalibrationReport& r, double batch_time_s) {
  out << method << ',' << dataset << ',' << seed << ',' << fmt(r.ll) << ',' << fmt(r.rmse) << ',' << fmt(r.tce) << ','
      << fmt(r.rce) << ',' << fmt(r.brier) << ',' << fmt(r.ece) << ',' << fmt(r.err) << ',' << fmt(batch_time_s) << '\n';
}

}  // namespace dun
