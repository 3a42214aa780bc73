// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/datasets.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

namespace dun {
namespace {

TEST(Toy, WiggleMeanValues) {
  EXPECT_NEAR(wiggle_mean(0.0), 0.2, 1e-15);
  EXPECT_NEAR(wiggle_mean(0.5), 1.05, 1e-15);
}

TEST(Toy, SpiralsBalanced) {
  const auto ds = generate_toy("spirals", 200, 3);
  EXPECT_EQ(ds.task, Task::classification);
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_EQ(ds.input_dim(), 2u);
  EXPECT_DOUBLE_EQ(ds.y.mean(), 0.5);
  const auto labels = ds.labels(ds.train);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1u), 100);
}

TEST(Toy, SpiralArmsArePointReflections) {
  for (double t : {0.01, 0.2, 0.37, 0.5, 0.8, 1.0}) {
    const auto [x0, y0] = spiral_point(t, 0);
    const auto [x1, y1] = spiral_point(t, 1);
    EXPECT_NEAR(x0, -x1, 1e-14);
    EXPECT_NEAR(y0, -y1, 1e-14);
    EXPECT_NEAR(std::hypot(x0, y0), t, 1e-14);
  }
  // Two full turns: the same angle recurs at t and t + 1/2.
  const auto [a, b] = spiral_point(0.25, 0);
  const auto [c, d] = spiral_point(0.75, 0);
  EXPECT_NEAR(a / 0.25, c / 0.75, 1e-14);
  EXPECT_NEAR(b / 0.25, d / 0.75, 1e-14);
}

TEST(Toy, DeterministicPerSeedAndDistinctAcrossSeeds) {
  for (const auto& name : toy_names()) {
    const auto a = generate_toy(name, 50, 7), b = generate_toy(name, 50, 7), c = generate_toy(name, 50, 8);
    EXPECT_TRUE((a.x.array() == b.x.array()).all()) << name;
    EXPECT_TRUE((a.y.array() == b.y.array()).all()) << name;
    EXPECT_FALSE((a.x.array() == c.x.array()).all() && (a.y.array() == c.y.array()).all()) << name;
    EXPECT_EQ(a.size(), 50u);
    EXPECT_EQ(a.train.size(), 50u);
    EXPECT_TRUE(a.test.empty());
  }
}

TEST(Toy, WiggleInputAndNoiseMoments) {
  const auto ds = generate_toy("wiggle", 20000, 1);
  const auto n = static_cast<double>(ds.size());
  const double mx = ds.x.mean();
  const double vx = (ds.x.array() - mx).square().sum() / n;
  EXPECT_NEAR(mx, 5.0, 4 * std::sqrt(2.5 / n));
  EXPECT_NEAR(vx, 2.5, 0.1);
  double res = 0.0;
  for (Eigen::Index i = 0; i < ds.x.rows(); ++i) res += std::pow(ds.y(i, 0) - wiggle_mean(ds.x(i, 0)), 2);
  EXPECT_NEAR(res / n, 0.25, 0.015);
}

TEST(Toy, UnknownNameListsValidNames) {
  try {
    generate_toy("nope", 10, 0);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    for (const auto& name : toy_names()) EXPECT_NE(msg.find(name), std::string::npos) << msg;
  }
  EXPECT_THROW(generate_toy("wiggle", 1, 0), std::invalid_argument);
}

TEST(Csv, ParsesHeaderAndTargetColumn) {
  const auto ds = parse_csv("a,b,c\n1,2,3\n4,5,6\n7,8,9\n");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.input_dim(), 2u);
  EXPECT_EQ(ds.y(2, 0), 9.0);
  CsvOptions o;
  o.target_column = 0;
  o.has_header = false;
  const auto first = parse_csv("1,2,3\n4,5,6\n", o);
  EXPECT_EQ(first.y(1, 0), 4.0);
  EXPECT_EQ(first.x(1, 1), 6.0);
}

TEST(Csv, ErrorNamesRowAndColumn) {
  CsvOptions o;
  o.has_header = false;
  try {
    parse_csv("1,2,3,4\n5,6,7,abc\n", o);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 4"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_csv("1,2\n3\n", o), std::invalid_argument);
  EXPECT_THROW(parse_csv("", o), std::invalid_argument);
  EXPECT_THROW(parse_csv("h1,h2\n"), std::invalid_argument);
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), std::invalid_argument);
}

TEST(Csv, ClassificationLabels) {
  CsvOptions o;
  o.task = Task::classification;
  const auto ds = parse_csv("x,y\n0.5,0\n1.5,2\n", o);
  EXPECT_EQ(ds.num_classes, 3u);
  EXPECT_THROW(parse_csv("x,y\n0.5,0.5\n", o), std::invalid_argument);
}

TEST(Csv, RoundTripIsBitIdentical) {
  for (const auto& name : toy_names()) {
    const auto ds = generate_toy(name, 40, 2);
    const auto path = std::filesystem::temp_directory_path() / ("dun_csv_" + name + ".csv");
    write_csv(ds, path);
    CsvOptions o;
    o.task = ds.task;
    const auto back = load_csv(path, o);
    std::filesystem::remove(path);
    EXPECT_TRUE((back.x.array() == ds.x.array()).all()) << name;
    EXPECT_TRUE((back.y.array() == ds.y.array()).all()) << name;
  }
  EXPECT_EQ(format_csv(generate_toy("wiggle", 2, 0)).substr(0, 5), "x1,y\n");
}

TEST(Normalize, TrainColumnsStandardizedAndRoundTrip) {
  Rng rng(3);
  Dataset ds;
  ds.x = testing::gaussian_matrix(60, 3, rng, 4.0).array() + 2.0;
  ds.y = testing::gaussian_matrix(60, 1, rng, 0.1).array() - 7.0;
  for (std::size_t i = 0; i < 60; ++i) (i % 5 == 0 ? ds.test : ds.train).push_back(i);
  const auto norm = normalize(ds);
  const Matrix2D tx = norm.train_x(), ty = norm.train_y();
  for (Eigen::Index c = 0; c < tx.cols(); ++c) {
    EXPECT_NEAR(tx.col(c).mean(), 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(tx.col(c).array().square().mean()), 1.0, 1e-9);
  }
  EXPECT_NEAR(ty.mean(), 0.0, 1e-9);
  const auto back = denormalize(norm);
  EXPECT_LE((back.x - ds.x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((back.y - ds.y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((denormalize_targets(*norm.stats, norm.y) - ds.y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(normalize(norm), std::invalid_argument);
}

TEST(Normalize, StandardizedDataUnchanged) {
  Matrix2D x(4, 1);
  x << -1, 1, -1, 1;
  Dataset ds;
  ds.x = x;
  ds.y = x;
  ds.train = {0, 1, 2, 3};
  const auto norm = normalize(ds);
  EXPECT_LE((norm.x - x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((norm.y - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ConstantColumnScaledByOneAndEmptyTrainRejected) {
  Dataset ds;
  ds.x = Matrix2D::Constant(5, 1, 3.0);
  ds.y = Matrix2D::Zero(5, 1);
  ds.y(0, 0) = 1;
  ds.train = {0, 1, 2, 3, 4};
  const auto norm = normalize(ds);
  EXPECT_EQ(norm.stats->x_scale(0), 1.0);
  EXPECT_TRUE((norm.x.array() == 0.0).all());
  ds.train.clear();
  EXPECT_THROW(normalize(ds), std::invalid_argument);
}

TEST(Normalize, ClassificationLabelsUntouched) {
  const auto ds = normalize(generate_toy("spirals", 20, 1));
  EXPECT_FALSE(ds.stats->targets_normalized);
  EXPECT_TRUE((ds.y.array() == generate_toy("spirals", 20, 1).y.array()).all());
}

TEST(Split, StandardSizesPartitionAndDeterminism) {
  const auto ds = generate_toy("wiggle", 100, 0);
  SplitSpec s;
  s.seed = 4;
  const auto a = split(ds, s), b = split(ds, s);
  EXPECT_EQ(a.test.size(), 10u);
  EXPECT_EQ(a.train.size(), 90u);
  EXPECT_EQ(a.test, b.test);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all.size(), 100u);
  s.seed = 5;
  EXPECT_NE(split(ds, s).test, a.test);
  s.test_fraction = 1.0;
  EXPECT_THROW(split(ds, s), std::invalid_argument);
}

TEST(Split, GapMiddleTercile) {
  Rng rng(9);
  Dataset ds;
  ds.x = testing::gaussian_matrix(99, 2, rng);
  ds.y = Matrix2D::Zero(99, 1);
  SplitSpec s;
  s.kind = SplitKind::gap;
  s.gap_feature = 1;
  const auto out = split(ds, s);
  std::vector<std::size_t> order(99);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ds.x(a, 1) < ds.x(b, 1); });
  std::vector<std::size_t> want(order.begin() + 33, order.begin() + 66);
  std::sort(want.begin(), want.end());
  EXPECT_EQ(out.test, want);
  double test_lo = 1e300, test_hi = -1e300;
  for (auto i : out.test) {
    test_lo = std::min(test_lo, ds.x(i, 1));
    test_hi = std::max(test_hi, ds.x(i, 1));
  }
  for (auto i : out.train) EXPECT_TRUE(ds.x(i, 1) < test_lo || ds.x(i, 1) > test_hi);
}

TEST(Split, GapErrors) {
  Dataset ds;
  ds.x = Matrix2D::Ones(10, 1);
  ds.y = Matrix2D::Zero(10, 1);
  SplitSpec s;
  s.kind = SplitKind::gap;
  EXPECT_THROW(split(ds, s), std::invalid_argument);
  s.gap_feature = 1;
  EXPECT_THROW(split(ds, s), std::invalid_argument);
  EXPECT_THROW(parse_split_kind("random"), std::invalid_argument);
  EXPECT_EQ(parse_split_kind("gap"), SplitKind::gap);
}

}  // namespace
}  // namespace dun
