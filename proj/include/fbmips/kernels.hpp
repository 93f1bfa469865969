#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fbmips/grid.hpp"

namespace fbmips {

/// phi(t, s) = H (2H - 1) |t - s|^{2H - 2}. Singular on the diagonal; never
/// evaluate it at t == s, integrate cell masses instead.
double phi(HurstParameter h, double t, double s);

/// Exact integrals of phi over grid cells [t_j, t_{j+1}] x [t_k, t_{k+1}].
///
/// For H > 1/2 the double antiderivative of phi is the fBm covariance R_H, so
/// each cell mass is a second difference of R_H at the cell corners. On a
/// uniform grid that difference depends only on the lag |j - k| and equals
/// the fGn autocovariance scaled by dt^{2H}; the diagonal cell carries
/// dt^{2H}, split evenly between {s < t} and {s > t}.
class KernelWeights {
 public:
  KernelWeights(HurstParameter h, const TimeGrid& grid);

  HurstParameter hurst() const { return h_; }
  const TimeGrid& grid() const { return grid_; }
  std::size_t n_cells() const { return grid_.n_steps(); }

  /// Mass of cell (j, k); j indexes t, k indexes s.
  double cell_mass(std::size_t j, std::size_t k) const { return lag_mass_[j > k ? j - k : k - j]; }
  /// Mass of cell (j, k) restricted to {s < t}.
  double triangular_mass(std::size_t j, std::size_t k) const {
    if (j > k) return lag_mass_[j - k];
    return j == k ? 0.5 * lag_mass_[0] : 0.0;
  }
  /// Cell mass as a function of the lag j - k >= 0.
  std::span<const double> lag_masses() const { return lag_mass_; }

  double total_mass() const;

 private:
  HurstParameter h_;
  TimeGrid grid_;
  std::vector<double> lag_mass_;
};

/// Throws ConfigError for h <= 1/2: the phi-correction vanishes there and
/// callers must take the Ito branch.
KernelWeights build_kernel_weights(HurstParameter h, const TimeGrid& grid);

enum class Region {
  kFull,           // [0,T]^2
  kLowerTriangle,  // {s < t}, diagonal cells at half mass
  kStrictLower,    // cells with k < j only
};

/// sum over cells of mass * (average of f at the four cell corners), where
/// f(j, k) is the integrand at (t_j, s_k). `f` is (n+1) x (n+1).
double double_integral(const PathMatrix& f, const KernelWeights& weights, Region region);

/// Same for an integrand given as a callable of node indices.
double double_integral(const std::function<double(std::size_t, std::size_t)>& f,
                       const KernelWeights& weights, Region region);

/// Fast path for separable integrands f(t_j, s_k) = u_j * v_k, for which the
/// corner average factors into the product of edge averages. O(n^2) with a
/// small constant and no per-pair callbacks.
double double_integral_separable(std::span<const double> u, std::span<const double> v,
                                 const KernelWeights& weights, Region region);

/// Writes the cell averages (x_j + x_{j+1}) / 2 into `out` (size n).
void edge_averages(std::span<const double> x, std::span<double> out);

}  // namespace fbmips
