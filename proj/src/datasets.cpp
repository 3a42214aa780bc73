// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace dun {

namespace {

constexpr double kPi = std::numbers::pi;

Dataset regression_1d(std::string name, const std::vector<double>& xs, const std::vector<double>& ys) {
  Dataset ds;
  ds.name = std::move(name);
  ds.task = Task::regression;
  ds.x.resize(static_cast<Eigen::Index>(xs.size()), 1);
  ds.y.resize(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ds.x(static_cast<Eigen::Index>(i), 0) = xs[i];
    ds.y(static_cast<Eigen::Index>(i), 0) = ys[i];
  }
  ds.train.resize(xs.size());
  std::iota(ds.train.begin(), ds.train.end(), 0);
  return ds;
}

/// Inputs drawn uniformly from a union of equally likely intervals.
std::vector<double> clustered_inputs(std::size_t n, const std::vector<std::pair<double, double>>& clusters, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, clusters.size() - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> xs(n);
  for (auto& x : xs) {
    const auto& [lo, hi] = clusters[pick(rng)];
    x = lo + (hi - lo) * unif(rng);
  }
  return xs;
}

Dataset make_wiggle(std::size_t n, Rng& rng) {
  // Input N(5, 2.5) and noise N(0, 0.25), both read as (mean, variance).
  std::normal_distribution<double> input(5.0, std::sqrt(2.5));
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = input(rng);
    ys[i] = wiggle_mean(xs[i]) + noise(rng);
  }
  return regression_1d("wiggle", xs, ys);
}

Dataset make_simple1d(std::size_t n, Rng& rng) {
  // Three separated clusters under a slowly varying function.
  const auto xs = clustered_inputs(n, {{-2.0, -1.3}, {-0.35, 0.35}, {1.3, 2.0}}, rng);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = std::sin(1.2 * xs[i]) + 0.2 * xs[i] + noise(rng);
  return regression_1d("simple1d", xs, ys);
}

Dataset make_clusters(std::size_t n, Rng& rng) {
  // Three wide-apart clusters under a faster varying function.
  const auto xs = clustered_inputs(n, {{-7.2, -4.8}, {-1.2, 1.2}, {4.8, 7.2}}, rng);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = std::sin(0.9 * xs[i]) + 0.1 * xs[i] + noise(rng);
  return regression_1d("clusters", xs, ys);
}

Dataset make_foong(std::size_t n, Rng& rng) {
  // Two clusters with a gap in between.
  const auto xs = clustered_inputs(n, {{-1.0, -0.7}, {0.5, 1.0}}, rng);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = std::cos(4.0 * xs[i] + 0.8) + noise(rng);
  return regression_1d("foong", xs, ys);
}

Dataset make_matern(std::size_t n, Rng& rng) {
  // One exact GP draw, Matern nu = 5/2, lengthscale 0.5, unit signal
  // variance, on a uniform grid over [-3, 3]; noise std 0.05.
  constexpr double lengthscale = 0.5, jitter = 1e-8, noise_std = 0.05;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double r = std::sqrt(5.0) * std::abs(xs[i] - xs[j]) / lengthscale;
      k(i, j) = (1.0 + r + r * r / 3.0) * std::exp(-r) + (i == j ? jitter : 0.0);
    }
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalError("Matern kernel factorization failed");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(i) = normal(rng);
  const Eigen::VectorXd f = llt.matrixL() * z;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = f(i) + noise_std * normal(rng);
  return regression_1d("matern", xs, ys);
}

Dataset make_spirals(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.15);
  Dataset ds;
  ds.name = "spirals";
  ds.task = Task::classification;
  ds.num_classes = 2;
  ds.x.resize(static_cast<Eigen::Index>(n), 2);
  ds.y.resize(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int arm = static_cast<int>(i % 2);
    const double t = 1.0 - unif(rng);  // (0, 1]
    const auto [px, py] = spiral_point(t, arm);
    const auto r = static_cast<Eigen::Index>(i);
    ds.x(r, 0) = px + noise(rng);
    ds.x(r, 1) = py + noise(rng);
    ds.y(r, 0) = arm;
  }
  ds.train.resize(n);
  std::iota(ds.train.begin(), ds.train.end(), 0);
  return ds;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
  std::string cell = raw;
  cell.erase(0, cell.find_first_not_of(" \t\r"));
  cell.erase(cell.find_last_not_of(" \t\r") + 1);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (cell.empty() || used != cell.size())
    throw std::invalid_argument("non-numeric cell '" + raw + "' at row " + std::to_string(row) + ", column " +
                                std::to_string(col));
  return v;
}

std::pair<RowVector, RowVector> column_stats(const Matrix2D& m, const std::string& what) {
  const double n = static_cast<double>(m.rows());
  RowVector mean = m.colwise().sum() / n;
  RowVector scale = ((m.rowwise() - mean).array().square().colwise().sum() / n).sqrt().matrix();
  for (Eigen::Index c = 0; c < scale.size(); ++c)
    if (!(scale(c) > 0.0)) {
      std::cerr << "warning: constant " << what << " column " << c << " left unscaled\n";
      scale(c) = 1.0;
    }
  return {mean, scale};
}

}  // namespace

Matrix2D select_rows(const Matrix2D& m, const std::vector<std::size_t>& idx) {
  Matrix2D out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

Matrix2D Dataset::train_x() const { return select_rows(x, train); }
Matrix2D Dataset::train_y() const { return select_rows(y, train); }
Matrix2D Dataset::test_x() const { return select_rows(x, test); }
Matrix2D Dataset::test_y() const { return select_rows(y, test); }

std::vector<std::size_t> Dataset::labels(const std::vector<std::size_t>& idx) const {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(static_cast<std::size_t>(y(static_cast<Eigen::Index>(i), 0)));
  return out;
}

double wiggle_mean(double x) { return std::sin(kPi * x) + 0.2 * std::cos(4.0 * kPi * x) - 0.3 * x; }

std::pair<double, double> spiral_point(double t, int arm) {
  const double angle = 4.0 * kPi * t + arm * kPi;
  return {t * std::sin(angle), t * std::cos(angle)};
}

std::vector<std::string> toy_names() { return {"wiggle", "simple1d", "clusters", "foong", "matern", "spirals"}; }

Dataset generate_toy(const std::string& name, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("toy datasets need n >= 2");
  Rng rng(seed);
  if (name == "wiggle") return make_wiggle(n, rng);
  if (name == "simple1d") return make_simple1d(n, rng);
  if (name == "clusters") return make_clusters(n, rng);
  if (name == "foong") return make_foong(n, rng);
  if (name == "matern") return make_matern(n, rng);
  if (name == "spirals") return make_spirals(n, rng);
  std::string valid;
  for (const auto& v : toy_names()) valid += (valid.empty() ? "" : ", ") + v;
  throw std::invalid_argument("unknown toy dataset '" + name + "' (valid: " + valid + ")");
}

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0, width = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && options.has_header) continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = split_cells(line);
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw std::invalid_argument("ragged row " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                                  " columns, found " + std::to_string(cells.size()));
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) row[c] = parse_cell(cells[c], line_no, c + 1);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("CSV contains no data rows");
  if (width < 2) throw std::invalid_argument("CSV needs at least one input and one target column");
  const long t = options.target_column < 0 ? static_cast<long>(width) + options.target_column : options.target_column;
  if (t < 0 || t >= static_cast<long>(width)) throw std::invalid_argument("target column out of range");

  Dataset ds;
  ds.name = "csv";
  ds.task = options.task;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.x.resize(n, static_cast<Eigen::Index>(width - 1));
  ds.y.resize(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index c_out = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = rows[static_cast<std::size_t>(r)][c];
      if (static_cast<long>(c) == t) {
        ds.y(r, 0) = v;
      } else {
        ds.x(r, c_out++) = v;
      }
    }
  }
  if (ds.task == Task::classification) {
    double max_label = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double v = ds.y(r, 0);
      if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("classification labels must be non-negative integers");
      max_label = std::max(max_label, v);
    }
    ds.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  }
  ds.train.resize(rows.size());
  std::iota(ds.train.begin(), ds.train.end(), 0);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  Dataset ds = parse_csv(ss.str(), options);
  ds.name = path.stem().string();
  return ds;
}

std::string format_csv(const Dataset& ds) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index c = 0; c < ds.x.cols(); ++c) os << (c ? "," : "") << 'x' << c + 1;
  if (ds.y.cols() == 1) {
    os << ",y\n";
  } else {
    for (Eigen::Index c = 0; c < ds.y.cols(); ++c) os << ",y" << c + 1;
    os << '\n';
  }
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.x.cols(); ++c) os << (c ? "," : "") << ds.x(r, c);
    for (Eigen::Index c = 0; c < ds.y.cols(); ++c) os << ',' << ds.y(r, c);
    os << '\n';
  }
  return os.str();
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << format_csv(ds);
}

Dataset normalize(const Dataset& ds) {
  if (ds.train.empty()) throw std::invalid_argument("cannot normalize with an empty train split");
  if (ds.stats) throw std::invalid_argument("dataset is already normalized");
  NormalizationStats st;
  std::tie(st.x_mean, st.x_scale) = column_stats(ds.train_x(), "input");
  st.targets_normalized = ds.task == Task::regression;
  if (st.targets_normalized) std::tie(st.y_mean, st.y_scale) = column_stats(ds.train_y(), "target");

  Dataset out = ds;
  out.x = ((ds.x.rowwise() - st.x_mean).array().rowwise() / st.x_scale.array()).matrix();
  if (st.targets_normalized) out.y = ((ds.y.rowwise() - st.y_mean).array().rowwise() / st.y_scale.array()).matrix();
  out.stats = std::move(st);
  return out;
}

Matrix2D denormalize_targets(const NormalizationStats& stats, const Matrix2D& y) {
  if (!stats.targets_normalized) return y;
  return ((y.array().rowwise() * stats.y_scale.array()).rowwise() + stats.y_mean.array()).matrix();
}

Dataset denormalize(const Dataset& ds) {
  if (!ds.stats) return ds;
  Dataset out = ds;
  const auto& st = *ds.stats;
  out.x = ((ds.x.array().rowwise() * st.x_scale.array()).rowwise() + st.x_mean.array()).matrix();
  out.y = denormalize_targets(st, ds.y);
  out.stats.reset();
  return out;
}

SplitKind parse_split_kind(const std::string& s) {
  if (s == "none") return SplitKind::none;
  if (s == "standard") return SplitKind::standard;
  if (s == "gap") return SplitKind::gap;
  throw std::invalid_argument("unknown split kind '" + s + "' (expected none, standard or gap)");
}

Dataset split(const Dataset& ds, const SplitSpec& spec) {
  const std::size_t n = ds.size();
  Dataset out = ds;
  out.train.clear();
  out.test.clear();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  switch (spec.kind) {
    case SplitKind::none:
      out.train = idx;
      return out;
    case SplitKind::standard: {
      if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw std::invalid_argument("test fraction must lie in (0, 1)");
      Rng rng(spec.seed);
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
      out.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
      out.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
      break;
    }
    case SplitKind::gap: {
      if (spec.gap_feature >= ds.input_dim()) throw std::invalid_argument("gap feature index out of range");
      const auto f = static_cast<Eigen::Index>(spec.gap_feature);
      if (ds.x.col(f).maxCoeff() == ds.x.col(f).minCoeff()) throw std::invalid_argument("gap feature is constant");
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return ds.x(static_cast<Eigen::Index>(a), f) < ds.x(static_cast<Eigen::Index>(b), f);
      });
      const std::size_t lo = n / 3, hi = (2 * n) / 3;
      for (std::size_t r = 0; r < n; ++r) (r >= lo && r < hi ? out.test : out.train).push_back(idx[r]);
      break;
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace dun
