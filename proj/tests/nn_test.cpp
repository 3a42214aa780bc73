// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/nn.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace dun {
namespace {

using testing::gaussian_matrix;

ArchitectureConfig block_config(std::size_t width, bool residual, bool batchnorm, double dropout = 0.0) {
  ArchitectureConfig c;
  c.width = width;
  c.residual = residual;
  c.batchnorm = batchnorm;
  c.dropout = dropout;
  return c;
}

// Straight-line recomputation of one block, written element by element.
Matrix2D reference_block(const HiddenBlock& b, const Matrix2D& a, Mode mode) {
  const Eigen::Index n = a.rows();
  const std::size_t w = b.linear.out_dim();
  Matrix2D h(n, w);
  for (Eigen::Index r = 0; r < n; ++r)
    for (std::size_t j = 0; j < w; ++j) {
      double s = b.linear.bias.value(0, j);
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(r, k) * b.linear.weight.value(k, j);
      h(r, j) = s > 0.0 ? s : 0.0;
    }
  if (b.batchnorm) {
    for (std::size_t j = 0; j < w; ++j) {
      double mean = b.bn.running_mean(j), var = b.bn.running_var(j);
      if (mode == Mode::train) {
        mean = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) mean += h(r, j);
        mean /= static_cast<double>(n);
        var = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) var += (h(r, j) - mean) * (h(r, j) - mean);
        var /= static_cast<double>(n);
      }
      for (Eigen::Index r = 0; r < n; ++r)
        h(r, j) = b.bn.scale.value(0, j) * (h(r, j) - mean) / std::sqrt(var + 1e-5) + b.bn.shift.value(0, j);
    }
  }
  if (b.residual) h += a;
  return h;
}

HiddenBlock random_block(Rng& rng, std::size_t w, bool residual, bool batchnorm) {
  HiddenBlock b = make_hidden_block(block_config(w, residual, batchnorm), rng);
  b.linear.bias.value = gaussian_matrix(1, w, rng, 0.3);
  if (batchnorm) {
    b.bn.scale.value = Matrix2D::Constant(1, w, 1.0) + gaussian_matrix(1, w, rng, 0.2);
    b.bn.shift.value = gaussian_matrix(1, w, rng, 0.2);
    b.bn.running_mean = gaussian_matrix(1, w, rng, 0.5);
    b.bn.running_var = (gaussian_matrix(1, w, rng).array().square() + 0.3).matrix();
  }
  return b;
}

TEST(HeInit, VarianceMatchesFanIn) {
  Rng rng(7);
  const LinearLayer l = init_linear_he(100, 100, rng);
  const double mean = l.weight.value.mean();
  const double var = (l.weight.value.array() - mean).square().sum() / (l.weight.value.size() - 1);
  EXPECT_GE(var, 0.016);
  EXPECT_LE(var, 0.024);
}

TEST(HeInit, SameSeedIsBitwiseIdentical) {
  Rng a(99), b(99);
  const LinearLayer la = init_linear_he(10, 7, a), lb = init_linear_he(10, 7, b);
  EXPECT_TRUE((la.weight.value.array() == lb.weight.value.array()).all());
}

TEST(HeInit, BiasesAreZeroAndBatchNormStartsNeutral) {
  Rng rng(3);
  const HiddenBlock b = make_hidden_block(block_config(6, true, true), rng);
  EXPECT_TRUE((b.linear.bias.value.array() == 0.0).all());
  EXPECT_TRUE((b.bn.scale.value.array() == 1.0).all());
  EXPECT_TRUE((b.bn.shift.value.array() == 0.0).all());
  EXPECT_TRUE((b.bn.running_mean.array() == 0.0).all());
  EXPECT_TRUE((b.bn.running_var.array() == 1.0).all());
}

TEST(Block, ZeroWeightResidualIsIdentity) {
  Rng rng(4);
  HiddenBlock b = make_hidden_block(block_config(5, true, false), rng);
  b.linear.weight.value.setZero();
  const Matrix2D a = gaussian_matrix(8, 5, rng);
  for (Mode m : {Mode::train, Mode::eval}) EXPECT_TRUE((block_forward(b, a, m).array() == a.array()).all());
}

TEST(Block, TrainModeBatchNormCentersFeatures) {
  Rng rng(5);
  HiddenBlock b = make_hidden_block(block_config(6, false, true), rng);
  b.linear.bias.value.setConstant(0.5);  // keep every ReLU unit active on some rows
  const Matrix2D out = block_forward(b, gaussian_matrix(40, 6, rng), Mode::train);
  for (Eigen::Index j = 0; j < out.cols(); ++j) EXPECT_NEAR(out.col(j).mean(), 0.0, 1e-9);
}

TEST(Block, MatchesStraightLineRecomputation) {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const bool residual = trial % 2 == 0, batchnorm = (trial / 2) % 2 == 0;
    const Mode mode = trial % 3 == 0 ? Mode::train : Mode::eval;
    const std::size_t w = testing::uniform_index(rng, 1, 9);
    const HiddenBlock b = random_block(rng, w, residual, batchnorm);
    const Matrix2D a = gaussian_matrix(static_cast<Eigen::Index>(testing::uniform_index(rng, 2, 12)), w, rng);
    const Matrix2D got = b.forward(a, {mode});
    const Matrix2D want = reference_block(b, a, mode);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
  }
}

TEST(Block, RunningStatsOnlyMoveInTrainMode) {
  Rng rng(8);
  HiddenBlock b = random_block(rng, 4, true, true);
  const RowVector mean0 = b.bn.running_mean, var0 = b.bn.running_var;
  const Matrix2D a = gaussian_matrix(10, 4, rng);
  block_forward(b, a, Mode::eval);
  EXPECT_TRUE((b.bn.running_mean.array() == mean0.array()).all());

  HiddenBlock::Cache cache;
  b.forward(a, {Mode::train}, &cache);
  block_forward(b, a, Mode::train);
  const RowVector want_mean = 0.9 * mean0 + 0.1 * cache.batch_mean;
  const RowVector want_var = 0.9 * var0 + 0.1 * cache.batch_var;
  EXPECT_LE((b.bn.running_mean - want_mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((b.bn.running_var - want_var).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Block, BatchOfOneInTrainModeIsRejected) {
  Rng rng(9);
  HiddenBlock b = random_block(rng, 3, true, true);
  EXPECT_THROW(block_forward(b, gaussian_matrix(1, 3, rng), Mode::train), std::invalid_argument);
  EXPECT_NO_THROW(block_forward(b, gaussian_matrix(1, 3, rng), Mode::eval));
}

TEST(Block, ShapeMismatchNamesBothShapes) {
  Rng rng(10);
  HiddenBlock b = random_block(rng, 3, true, false);
  try {
    block_forward(b, gaussian_matrix(2, 5, rng), Mode::eval);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(shape_string(Matrix2D(2, 5))), std::string::npos) << msg;
    EXPECT_NE(msg.find(shape_string(Matrix2D(3, 3))), std::string::npos) << msg;
  }
}

TEST(Block, BackwardMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    const bool residual = trial % 2 == 0, batchnorm = (trial / 2) % 2 == 0;
    const Mode mode = (trial / 4) % 2 == 0 ? Mode::train : Mode::eval;
    HiddenBlock b = random_block(rng, 4, residual, batchnorm);
    Param input(gaussian_matrix(6, 4, rng), false);
    const Matrix2D probe = gaussian_matrix(6, 4, rng);

    ParamBundle bundle;
    bundle.add("input", input);
    bundle.add("weight", b.linear.weight);
    bundle.add("bias", b.linear.bias);
    if (batchnorm) {
      bundle.add("scale", b.bn.scale);
      bundle.add("shift", b.bn.shift);
    }
    LossFunction loss = [&](bool with_grad) {
      HiddenBlock::Cache cache;
      const Matrix2D out = b.forward(input.value, {mode}, &cache);
      if (with_grad) {
        bundle.zero_grad();
        input.grad = b.backward(cache, probe);
      }
      return (out.array() * probe.array()).sum();
    };
    EXPECT_LE(grad_check(loss, bundle, 1e-6), 1e-6) << "trial " << trial;
  }
}

TEST(Dropout, ZeroRateIsIdentity) {
  Rng rng(12);
  const Matrix2D a = gaussian_matrix(5, 5, rng);
  EXPECT_TRUE((dropout_apply(a, 0.0, 1, Mode::train).array() == a.array()).all());
}

TEST(Dropout, EvalModeIsIdentity) {
  Rng rng(13);
  const Matrix2D a = gaussian_matrix(5, 5, rng);
  EXPECT_TRUE((dropout_apply(a, 0.3, 1, Mode::eval).array() == a.array()).all());
}

TEST(Dropout, InvertedScalingPreservesMean) {
  const Matrix2D ones = Matrix2D::Ones(1000, 1000);
  const double mean = dropout_apply(ones, 0.5, 42, Mode::train).mean();
  EXPECT_GE(mean, 0.99);
  EXPECT_LE(mean, 1.01);
}

TEST(Dropout, SameSeedSameMask) {
  const Matrix2D ones = Matrix2D::Ones(20, 20);
  const Matrix2D a = dropout_apply(ones, 0.4, 5, Mode::train);
  const Matrix2D b = dropout_apply(ones, 0.4, 5, Mode::train);
  const Matrix2D c = dropout_apply(ones, 0.4, 6, Mode::train);
  EXPECT_TRUE((a.array() == b.array()).all());
  EXPECT_FALSE((a.array() == c.array()).all());
  EXPECT_TRUE(((a.array() == 0.0) || (a.array() == 1.0 / 0.6)).all());
}

TEST(Dropout, RateOfOneIsRejected) {
  const Matrix2D ones = Matrix2D::Ones(2, 2);
  EXPECT_THROW(dropout_apply(ones, 1.0, 0, Mode::train), std::invalid_argument);
  EXPECT_THROW(dropout_apply(ones, -0.1, 0, Mode::train), std::invalid_argument);
}

TEST(ArchitectureConfig, Validation) {
  ArchitectureConfig c;
  EXPECT_NO_THROW(c.validate());
  c.width = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.width = 3;
  c.task = Task::classification;
  c.output_dim = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace dun
