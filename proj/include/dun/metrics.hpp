// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/model.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dun {

/// Single Gaussian matching the first two moments of a Gaussian mixture.
struct PredictiveGaussian {
  double mean = 0.0;
  double variance = 1.0;
  double model_term = 0.0;  // spread of component means
  double noise_term = 1.0;  // expected observation variance
};

/// Mixture with shared observation variance. Throws for noise_var <= 0 or
/// mismatched lengths.
PredictiveGaussian moment_match(std::span<const double> weights, std::span<const double> means, double noise_var);

/// Mixture whose components carry their own observation variance.
PredictiveGaussian moment_match(std::span<const double> weights, std::span<const double> means,
                                std::span<const double> noise_vars);

/// Moment-matched predictive for every datum of output column `column`.
std::vector<PredictiveGaussian> moment_match_all(const GaussianMixture& mixture, Eigen::Index column = 0);

/// Entropy in nats with 0 ln 0 = 0.
double predictive_entropy(std::span<const double> probs);

double normal_cdf(double y, double mean, double variance);

/// Tail calibration error of CDF-transformed targets at level tau in (0, 1/2).
/// Uses |tau - |B_s|/N| per tail; zero when both tails are empty.
double tce(std::span<const double> cdf_values, double tau = 0.1);

/// Regression calibration error over `bins` equal-width bins of [0, 1]; the
/// last bin is closed.
double rce(std::span<const double> cdf_values, std::size_t bins = 10);

double brier(const Matrix2D& probs, std::span<const std::size_t> labels);

/// Expected calibration error binned on max-probability confidence.
double ece(const Matrix2D& probs, std::span<const std::size_t> labels, std::size_t bins = 10);

struct RejectionPoint {
  double fraction = 0.0;
  double accuracy = 1.0;
};

/// At each fraction r, rejects the ceil(r N) highest-entropy points (earlier
/// index first among ties) and reports accuracy on the rest; 1 when nothing
/// remains.
std::vector<RejectionPoint> rejection_curve(std::span<const double> entropies, std::span<const bool> correct,
                                            std::span<const double> fractions);

struct CalibrationReport {
  double ll = 0.0;
  std::optional<double> rmse;
  std::optional<double> tce;
  std::optional<double> rce;
  std::optional<double> brier;
  std::optional<double> ece;
  std::optional<double> err;
  std::size_t bins = 10;
};

/// Mean Gaussian log-likelihood, RMSE of the means, TCE and RCE.
CalibrationReport evaluate_regression(std::span<const PredictiveGaussian> predictive, std::span<const double> targets,
                                      double tau = 0.1, std::size_t bins = 10);

CalibrationReport evaluate_classification(const Matrix2D& probs, std::span<const std::size_t> labels,
                                          std::size_t bins = 10);

inline constexpr char kReportHeader[] = "method,dataset,seed,ll,rmse,tce,rce,brier,ece,err,batch_time_s";

/// One CSV row (no header) in kReportHeader order; absent fields are empty.
void write_report_row(std::ostream& out, const std::string& method, const std::string& dataset, std::uint64_t seed,
                      const CalibrationReport& report, double batch_time_s);

}  // namespace dun
