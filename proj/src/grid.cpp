#include "fbmips/grid.hpp"

#include <cmath>
#include <string>

#include "fbmips/error.hpp"

namespace fbmips {

HurstParameter::HurstParameter(double h) : h_(h) {
  if (!(h > 0.0 && h < 1.0)) {
    throw ConfigError("Hurst index must lie in (0,1), got " + std::to_string(h));
  }
}

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("time horizon must be positive and finite");
  }
  if (n_steps == 0) throw ConfigError("time grid needs at least one step");
}

double TimeGrid::node(std::size_t j) const {
  if (j == n_steps_) return horizon_;
  return static_cast<double>(j) * dt();
}

TimeGrid TimeGrid::truncated(std::size_t m) const {
  if (m == 0 || m > n_steps_) throw ConfigError("invalid truncation of time grid");
  return TimeGrid(node(m), m);
}

std::vector<double> PathMatrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

PathMatrix PathMatrix::leading_columns(std::size_t cols) const {
  PathMatrix out(rows_, cols);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = (*this)(i, j);
  }
  return out;
}

}  // namespace fbmips
