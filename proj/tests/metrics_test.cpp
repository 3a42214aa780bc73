// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/metrics.hpp"
#include "dun/objectives.hpp"

#include "metric_oracles.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <numbers>
#include <sstream>

namespace dun {
namespace {

using testing::uniform_index;
using testing::uniform_real;

// std::vector<bool> is packed, so copy into a plain array first.
std::vector<RejectionPoint> reject(const std::vector<double>& h, const std::vector<bool>& c,
                                   const std::vector<double>& grid) {
  const auto flags = std::make_unique<bool[]>(c.size());
  std::copy(c.begin(), c.end(), flags.get());
  return rejection_curve(h, std::span<const bool>(flags.get(), c.size()), grid);
}

TEST(MomentMatch, Examples) {
  const std::vector<double> w{0.5, 0.5}, mu{0.0, 2.0};
  const auto g = moment_match(w, mu, 1.0);
  EXPECT_DOUBLE_EQ(g.mean, 1.0);
  EXPECT_DOUBLE_EQ(g.variance, 2.0);
  EXPECT_DOUBLE_EQ(g.model_term, 1.0);
  EXPECT_DOUBLE_EQ(g.noise_term, 1.0);
  const std::vector<double> same{3.25, 3.25, 3.25}, w3{0.2, 0.3, 0.5};
  const auto h = moment_match(w3, same, 0.4);
  EXPECT_EQ(h.mean, 3.25);
  EXPECT_EQ(h.variance, 0.4);
  EXPECT_EQ(h.model_term, 0.0);
}

TEST(MomentMatch, Errors) {
  const std::vector<double> w{1.0}, mu{0.0}, two{0.0, 1.0};
  EXPECT_THROW(moment_match(w, mu, 0.0), std::invalid_argument);
  EXPECT_THROW(moment_match(w, mu, -1.0), std::invalid_argument);
  EXPECT_THROW(moment_match(w, two, 1.0), std::invalid_argument);
}

TEST(MomentMatch, ExactOracleAndDecomposition) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = uniform_index(rng, 1, 8);
    const auto w = testing::random_probs(rng, k);
    std::vector<double> mu(k);
    for (auto& m : mu) m = uniform_real(rng, -5, 5);
    const double s2 = uniform_real(rng, 0.01, 2.0);
    long double mean = 0, second = 0;
    for (std::size_t i = 0; i < k; ++i) {
      mean += static_cast<long double>(w[i]) * mu[i];
      second += static_cast<long double>(w[i]) * mu[i] * mu[i];
    }
    const auto g = moment_match(w, mu, s2);
    EXPECT_NEAR(g.mean, static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(g.model_term, static_cast<double>(second - mean * mean), 1e-11);
    EXPECT_NEAR(g.variance, g.model_term + g.noise_term, 1e-12);
    EXPECT_GE(g.variance, s2);
  }
}

TEST(MomentMatch, MonteCarloOracle) {
  Rng rng(12);
  const std::vector<double> w{0.2, 0.5, 0.3}, mu{-1.0, 0.5, 2.0};
  const auto g = moment_match(w, mu, 0.3);
  const auto mc = oracle::sample_mixture(w, mu, 0.3, 1000000, rng);
  EXPECT_LE(std::abs(g.mean - mc.mean), 3 * mc.mean_se);
  EXPECT_LE(std::abs(g.variance - mc.variance), 3 * mc.variance_se);
}

TEST(MomentMatch, PerComponentNoiseIsWeightedMean) {
  const std::vector<double> w{0.25, 0.75}, mu{0.0, 0.0}, s2{1.0, 3.0};
  EXPECT_DOUBLE_EQ(moment_match(w, mu, s2).noise_term, 2.5);
}

TEST(Entropy, Examples) {
  const std::vector<double> onehot{0.0, 1.0, 0.0}, uniform(5, 0.2);
  EXPECT_EQ(predictive_entropy(onehot), 0.0);
  EXPECT_NEAR(predictive_entropy(uniform), std::log(5.0), 1e-15);
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const auto p = testing::random_probs(rng, uniform_index(rng, 1, 10));
    EXPECT_NEAR(predictive_entropy(p), oracle::entropy(p), 1e-12);
  }
}

TEST(Tce, Examples) {
  std::vector<double> v(100, 0.5);
  for (int i = 0; i < 10; ++i) {
    v[static_cast<std::size_t>(i)] = 0.05;
    v[static_cast<std::size_t>(99 - i)] = 0.95;
  }
  EXPECT_NEAR(tce(v, 0.1), 0.0, 1e-15);
  std::vector<double> w(100, 0.5);
  for (int i = 0; i < 20; ++i) w[static_cast<std::size_t>(i)] = 0.01;
  EXPECT_NEAR(tce(w, 0.1), 0.1, 1e-15);
  EXPECT_EQ(tce(std::vector<double>(7, 0.5), 0.1), 0.0);
  EXPECT_THROW(tce(v, 0.5), std::invalid_argument);
  EXPECT_THROW(tce(v, 0.0), std::invalid_argument);
}

TEST(Tce, GaussianResidualsMatchTailCountOracle) {
  Rng rng(14);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> cdf;
  for (int i = 0; i < 500; ++i) cdf.push_back(normal_cdf(1.0 + 0.5 * z(rng), 1.0, 0.25));
  EXPECT_NEAR(tce(cdf, 0.1), oracle::tce(cdf, 0.1), 1e-12);
  EXPECT_LT(tce(cdf, 0.1), 0.05);
}

TEST(Rce, Examples) {
  std::vector<double> v;
  for (int b = 0; b < 10; ++b)
    for (int j = 0; j < 3; ++j) v.push_back(0.1 * b + 0.05);
  EXPECT_NEAR(rce(v, 10), 0.0, 1e-15);
  EXPECT_NEAR(rce(std::vector<double>(13, 0.42), 10), 0.9, 1e-15);
  EXPECT_NEAR(rce(std::vector<double>(4, 1.0), 10), 0.9, 1e-15);
  EXPECT_THROW(rce(v, 1), std::invalid_argument);
}

TEST(Brier, Examples) {
  Matrix2D onehot(2, 3);
  onehot << 1, 0, 0, 0, 0, 1;
  const std::vector<std::size_t> labels{0, 2};
  EXPECT_EQ(brier(onehot, labels), 0.0);
  const Matrix2D half = Matrix2D::Constant(3, 2, 0.5);
  const std::vector<std::size_t> l3{0, 1, 1};
  EXPECT_DOUBLE_EQ(brier(half, l3), 0.25);
}

TEST(Ece, Examples) {
  Matrix2D sure(2, 2);
  sure << 1, 0, 0, 1;
  const std::vector<std::size_t> right{0, 1};
  EXPECT_EQ(ece(sure, right), 0.0);
  Matrix2D one(1, 2);
  one << 0.8, 0.2;
  const std::vector<std::size_t> wrong{1};
  EXPECT_NEAR(ece(one, wrong), 0.8, 1e-15);
}

TEST(Rejection, Examples) {
  const std::vector<double> h{0.1, 0.2, 0.3, 0.4}, grid{0.0, 0.25, 0.5, 1.0};
  const std::vector<bool> all{true, true, true, true};
  for (const auto& p : reject(h, all, grid)) EXPECT_EQ(p.accuracy, 1.0);
  // Six in-distribution points (four correct), four OOD points above them.
  const std::vector<double> h2{0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 1.0, 1.1, 1.2, 1.3};
  const std::vector<bool> c2{true, true, false, true, false, true, false, false, false, false};
  const std::vector<double> g2{0.0, 0.2, 0.4, 1.0};
  const auto curve = reject(h2, c2, g2);
  EXPECT_DOUBLE_EQ(curve[0].accuracy, 0.4);
  EXPECT_DOUBLE_EQ(curve[1].accuracy, 0.5);
  EXPECT_DOUBLE_EQ(curve[2].accuracy, 4.0 / 6.0);
  EXPECT_EQ(curve[3].accuracy, 1.0);
  EXPECT_THROW(reject(h2, c2, std::vector<double>{1.5}), std::invalid_argument);
}

TEST(Rejection, RaisingIncorrectEntropyNeverHurts) {
  Rng rng(15);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = uniform_index(rng, 1, 20);
    std::vector<double> h(n), grid;
    std::vector<bool> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = static_cast<double>(uniform_index(rng, 0, 5));
      c[i] = uniform_index(rng, 0, 1) == 1;
    }
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    std::vector<std::size_t> wrong;
    for (std::size_t i = 0; i < n; ++i)
      if (!c[i]) wrong.push_back(i);
    if (wrong.empty()) continue;
    auto raised = h;
    raised[wrong[uniform_index(rng, 0, wrong.size() - 1)]] += 1.0 + uniform_index(rng, 0, 3);
    const auto before = reject(h, c, grid), after = reject(raised, c, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_GE(after[i].accuracy, before[i].accuracy - 1e-15);
  }
}

TEST(Oracles, RandomInstances) {
  Rng rng(16);
  for (int t = 0; t < 100; ++t) {
    const auto in = oracle::random_instance(rng);
    const std::size_t bins = uniform_index(rng, 2, 12);
    const double tau = uniform_index(rng, 0, 1) ? 0.1 : uniform_real(rng, 0.01, 0.49);
    EXPECT_NEAR(tce(in.values, tau), oracle::tce(in.values, tau), 1e-12);
    EXPECT_NEAR(rce(in.values, bins), oracle::rce(in.values, bins), 1e-12);
    EXPECT_NEAR(brier(in.probs, in.labels), oracle::brier(in.probs, in.labels), 1e-12);
    EXPECT_NEAR(ece(in.probs, in.labels, bins), oracle::ece(in.probs, in.labels, bins), 1e-12);
    std::vector<double> h;
    for (Eigen::Index r = 0; r < in.probs.rows(); ++r)
      h.push_back(std::round(predictive_entropy(std::vector<double>(in.probs.row(r).begin(), in.probs.row(r).end())) * 4) / 4);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    const auto curve = reject(h, in.correct, grid);
    const auto want = oracle::rejection_accuracy(h, in.correct, 20);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(curve[i].accuracy, want[i], 1e-12);
  }
}

TEST(Oracles, PermutationInvarianceAndRange) {
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    auto v = oracle::random_instance(rng).values;
    const double a = tce(v, 0.1), b = rce(v, 10);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_NEAR(tce(v, 0.1), a, 1e-15);
    EXPECT_NEAR(rce(v, 10), b, 1e-15);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

TEST(Evaluate, RegressionLogLikelihoodMatchesDirectSum) {
  Rng rng(18);
  std::vector<PredictiveGaussian> pred;
  std::vector<double> y;
  long double ll = 0.0, se = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> w{0.3, 0.7}, mu{uniform_real(rng, -1, 1), uniform_real(rng, -1, 1)};
    pred.push_back(moment_match(w, mu, uniform_real(rng, 0.1, 1.0)));
    y.push_back(uniform_real(rng, -2, 2));
    const auto& g = pred.back();
    ll += -0.5 * std::log(2 * std::numbers::pi * g.variance) - (y.back() - g.mean) * (y.back() - g.mean) / (2 * g.variance);
    se += (y.back() - g.mean) * (y.back() - g.mean);
  }
  const auto rep = evaluate_regression(pred, y);
  EXPECT_NEAR(rep.ll, static_cast<double>(ll / 50), 1e-12);
  EXPECT_NEAR(*rep.rmse, static_cast<double>(std::sqrt(se / 50)), 1e-12);
  EXPECT_FALSE(rep.brier.has_value());
}

TEST(Evaluate, ClassificationFields) {
  Matrix2D p(4, 2);
  p << 0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7;
  const std::vector<std::size_t> y{0, 1, 1, 1};
  const auto rep = evaluate_classification(p, y);
  EXPECT_DOUBLE_EQ(*rep.err, 0.25);
  EXPECT_NEAR(rep.ll, (std::log(0.9) + std::log(0.8) + std::log(0.4) + std::log(0.7)) / 4, 1e-15);
  EXPECT_FALSE(rep.rmse.has_value());
}

TEST(Report, RowLayout) {
  CalibrationReport r;
  r.ll = -1.5;
  r.rmse = 0.25;
  r.tce = 0.0;
  r.rce = 0.125;
  std::ostringstream os;
  write_report_row(os, "dun_vi", "wiggle", 3, r, 0.0);
  EXPECT_EQ(os.str(), "dun_vi,wiggle,3,-1.5,0.25,0,0.125,,,,0\n");
  EXPECT_EQ(std::string(kReportHeader), "method,dataset,seed,ll,rmse,tce,rce,brier,ece,err,batch_time_s");
}

}  // namespace
}  // namespace dun
