#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fbmips/grid.hpp"
#include "fbmips/rng.hpp"

namespace fbmips {

/// Cov(B_t, B_s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(HurstParameter h, double t, double s);

/// Autocovariance of unit-step fractional Gaussian noise at integer lag k.
double fgn_autocovariance(HurstParameter h, long long lag);

/// N independent fBm paths on a common grid.
struct FbmEnsemble {
  HurstParameter hurst{0.5};
  TimeGrid grid{1.0, 1};
  PathMatrix increments;  // N x n_steps
  PathMatrix values;      // N x (n_steps + 1), values(i, 0) == 0

  std::size_t n_paths() const { return increments.rows(); }
};

enum class FbmMethod { kAuto, kCirculant, kCholesky };

/// Sampler for exact fGn on a fixed (h, grid). Construction does the
/// O(n log n) eigen-decomposition of the circulant embedding once, or the
/// O(n^3) Cholesky factor when the embedding is not nonnegative (or when
/// kCholesky is forced).
class FbmSampler {
 public:
  FbmSampler(HurstParameter h, const TimeGrid& grid, FbmMethod method = FbmMethod::kAuto);

  HurstParameter hurst() const { return h_; }
  const TimeGrid& grid() const { return grid_; }
  bool uses_circulant() const { return use_circulant_; }
  double min_embedding_eigenvalue() const { return min_eigenvalue_; }

  /// One path of increments driven by `engine`.
  std::vector<double> sample_increments(Engine& engine) const;

  /// n_paths paths; path i draws from StreamId{seed, replication, i, purpose}.
  FbmEnsemble sample(std::size_t n_paths, std::uint64_t master_seed, std::uint64_t replication,
                     StreamPurpose purpose = StreamPurpose::kNoise) const;

 private:
  HurstParameter h_;
  TimeGrid grid_;
  bool use_circulant_ = true;
  double min_eigenvalue_ = 0.0;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda_k / M), size M = 2n
  std::vector<double> cholesky_;    // lower-triangular, row-major n x n
};

/// Convenience wrapper building a sampler per call.
FbmEnsemble sample_fbm(HurstParameter h, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t master_seed, std::uint64_t replication = 0,
                       StreamPurpose purpose = StreamPurpose::kNoise);

/// Dense Cholesky of a symmetric matrix (row-major n x n). Throws
/// NumericalError naming the first non-positive leading minor.
std::vector<double> cholesky_lower(const std::vector<double>& a, std::size_t n);

/// Writes `path_index,node_index,time,value` rows in (i, j) order.
void write_fbm_csv(const FbmEnsemble& ensemble, std::ostream& out);

}  // namespace fbmips
