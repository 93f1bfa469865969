#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fbmips {

/// Hurst index of a fractional Brownian motion, 0 < h < 1.
class HurstParameter {
 public:
  explicit HurstParameter(double h);
  double value() const { return h_; }
  bool is_brownian() const { return h_ == 0.5; }

 private:
  double h_;
};

/// Uniform discretization 0 = t_0 < ... < t_n = T.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const { return horizon_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  double dt() const { return horizon_ / static_cast<double>(n_steps_); }
  double node(std::size_t j) const;

  /// Leading sub-grid [0, t_m] with m steps (same spacing).
  TimeGrid truncated(std::size_t m) const;

  bool operator==(const TimeGrid& other) const = default;

 private:
  double horizon_;
  std::size_t n_steps_;
};

/// Dense row-major matrix; rows are particles/paths, columns are grid nodes.
class PathMatrix {
 public:
  PathMatrix() = default;
  PathMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> column(std::size_t j) const;

  /// Copy of the first `cols` columns.
  PathMatrix leading_columns(std::size_t cols) const;

  const std::vector<double>& data() const { return data_; }

  bool operator==(const PathMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace fbmips
