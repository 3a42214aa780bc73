// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/nn.hpp"
#include "dun/numerics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dun {

/// Per-column affine statistics of the training split. Targets are only
/// normalized for regression.
struct NormalizationStats {
  RowVector x_mean, x_scale;
  RowVector y_mean, y_scale;
  bool targets_normalized = false;
};

struct Dataset {
  std::string name;
  Task task = Task::regression;
  Matrix2D x;  // [N x d_in]
  Matrix2D y;  // [N x d_out]; classification: [N x 1] class indices
  std::size_t num_classes = 0;
  std::optional<NormalizationStats> stats;
  /// Index partition; an unsplit dataset has every index in `train`.
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t output_dim() const { return task == Task::classification ? num_classes : static_cast<std::size_t>(y.cols()); }

  Matrix2D train_x() const;
  Matrix2D train_y() const;
  Matrix2D test_x() const;
  Matrix2D test_y() const;
  std::vector<std::size_t> labels(const std::vector<std::size_t>& idx) const;
};

Matrix2D select_rows(const Matrix2D& m, const std::vector<std::size_t>& idx);

/// Noise-free Wiggle regression function sin(pi x) + 0.2 cos(4 pi x) - 0.3 x.
double wiggle_mean(double x);

/// Noise-free spiral arm point for t in (0, 1]: radius t, angle 4 pi t + arm pi,
/// position (r sin angle, r cos angle).
std::pair<double, double> spiral_point(double t, int arm);

std::vector<std::string> toy_names();

/// Deterministic per (name, n, seed). Throws std::invalid_argument for an
/// unknown name (listing the valid ones) or n < 2.
Dataset generate_toy(const std::string& name, std::size_t n, std::uint64_t seed);

struct CsvOptions {
  /// Target column index; negative counts from the end (-1 = last).
  long target_column = -1;
  bool has_header = true;
  Task task = Task::regression;
};

/// Numeric CSV. Errors name the 1-based row/column of the offending cell.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes columns x1..xd then y (y1..yk for multi-output), 17 significant digits.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string format_csv(const Dataset& ds);

/// Standardizes inputs (and regression targets) with train-split mean and
/// population standard deviation. Constant columns get scale 1 and a warning
/// on stderr. Throws for an empty train split.
Dataset normalize(const Dataset& ds);
Dataset denormalize(const Dataset& ds);

/// Maps normalized regression targets/means back to data units.
Matrix2D denormalize_targets(const NormalizationStats& stats, const Matrix2D& y);

enum class SplitKind { none, standard, gap };

struct SplitSpec {
  SplitKind kind = SplitKind::standard;
  double test_fraction = 0.1;
  std::size_t gap_feature = 0;
  std::uint64_t seed = 0;
};

SplitKind parse_split_kind(const std::string& s);

/// standard: uniform random test subset of round(fraction N) points.
/// gap: sort by the feature; ranks [N/3, 2N/3) form the test set.
Dataset split(const Dataset& ds, const SplitSpec& spec);

}  // namespace dun
