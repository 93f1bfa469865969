#include "fbmips/kernels.hpp"

#include <cmath>
#include <string>

#include "fbmips/error.hpp"
#include "fbmips/fbm.hpp"

namespace fbmips {

double phi(HurstParameter h, double t, double s) {
  const double hv = h.value();
  if (hv < 0.5) throw ConfigError("phi kernel is defined here for H >= 1/2 only");
  if (t == s) throw ConfigError("phi is not integrable pointwise at t == s; use cell masses");
  return hv * (2.0 * hv - 1.0) * std::pow(std::abs(t - s), 2.0 * hv - 2.0);
}

KernelWeights::KernelWeights(HurstParameter h, const TimeGrid& grid)
    : h_(h), grid_(grid), lag_mass_(grid.n_steps()) {
  const double scale = std::pow(grid.dt(), 2.0 * h.value());
  for (std::size_t d = 0; d < lag_mass_.size(); ++d) {
    lag_mass_[d] = scale * fgn_autocovariance(h, static_cast<long long>(d));
  }
}

double KernelWeights::total_mass() const {
  const std::size_t n = n_cells();
  double acc = static_cast<double>(n) * lag_mass_[0];
  for (std::size_t d = 1; d < n; ++d) acc += 2.0 * static_cast<double>(n - d) * lag_mass_[d];
  return acc;
}

KernelWeights build_kernel_weights(HurstParameter h, const TimeGrid& grid) {
  if (h.value() <= 0.5) {
    throw ConfigError("kernel weights need H > 1/2 (got " + std::to_string(h.value()) +
                      "); for H = 1/2 the correction vanishes, use the Ito branch");
  }
  return KernelWeights(h, grid);
}

namespace {

double region_mass(const KernelWeights& w, std::size_t j, std::size_t k, Region region) {
  switch (region) {
    case Region::kFull:
      return w.cell_mass(j, k);
    case Region::kLowerTriangle:
      return w.triangular_mass(j, k);
    case Region::kStrictLower:
      return j > k ? w.cell_mass(j, k) : 0.0;
  }
  return 0.0;
}

}  // namespace

double double_integral(const std::function<double(std::size_t, std::size_t)>& f,
                       const KernelWeights& weights, Region region) {
  const std::size_t n = weights.n_cells();
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k_end = region == Region::kFull ? n : j + 1;
    for (std::size_t k = 0; k < k_end; ++k) {
      const double mass = region_mass(weights, j, k, region);
      if (mass == 0.0) continue;
      acc += mass * 0.25 * (f(j, k) + f(j + 1, k) + f(j, k + 1) + f(j + 1, k + 1));
    }
  }
  return acc;
}

double double_integral(const PathMatrix& f, const KernelWeights& weights, Region region) {
  const std::size_t nodes = weights.grid().n_nodes();
  if (f.rows() != nodes || f.cols() != nodes) {
    throw ConfigError("double_integral: integrand is " + std::to_string(f.rows()) + "x" +
                      std::to_string(f.cols()) + ", expected " + std::to_string(nodes) + "x" +
                      std::to_string(nodes));
  }
  return double_integral([&f](std::size_t j, std::size_t k) { return f(j, k); }, weights, region);
}

void edge_averages(std::span<const double> x, std::span<double> out) {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (x[j] + x[j + 1]);
}

double double_integral_separable(std::span<const double> u, std::span<const double> v,
                                 const KernelWeights& weights, Region region) {
  const std::size_t n = weights.n_cells();
  if (u.size() != n + 1 || v.size() != n + 1) {
    throw ConfigError("double_integral_separable: factors must have " + std::to_string(n + 1) +
                      " node values");
  }
  std::vector<double> ub(n), vb(n);
  edge_averages(u, ub);
  edge_averages(v, vb);
  const auto m = weights.lag_masses();

  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double inner = 0.0;
    // Cells strictly below the diagonal: k < j, lag j - k.
    const double* mj = m.data() + j;
    for (std::size_t k = 0; k < j; ++k) inner += mj[-static_cast<std::ptrdiff_t>(k)] * vb[k];
    switch (region) {
      case Region::kFull:
        for (std::size_t k = j + 1; k < n; ++k) inner += m[k - j] * vb[k];
        inner += m[0] * vb[j];
        break;
      case Region::kLowerTriangle:
        inner += 0.5 * m[0] * vb[j];
        break;
      case Region::kStrictLower:
        break;
    }
    acc += ub[j] * inner;
  }
  return acc;
}

}  // namespace fbmips
