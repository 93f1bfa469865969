#include "fbmips/fbm.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>

#include "fbmips/error.hpp"

namespace fbmips {

namespace {

// FFTW planning is not thread-safe; execution on new arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

PlanHandle make_forward_plan(std::size_t m) {
  std::vector<std::complex<double>> in(m), out(m);
  std::lock_guard lock(fftw_planner_mutex());
  return PlanHandle(fftw_plan_dft_1d(static_cast<int>(m), reinterpret_cast<fftw_complex*>(in.data()),
                                     reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED));
}

void execute(const PlanHandle& plan, std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out) {
  fftw_execute_dft(plan.get(), reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

// One plan per embedding size, shared process-wide.
const PlanHandle& cached_plan(std::size_t m) {
  static std::mutex cache_mutex;
  static std::vector<std::pair<std::size_t, std::shared_ptr<PlanHandle>>> cache;
  std::lock_guard lock(cache_mutex);
  for (const auto& [size, plan] : cache) {
    if (size == m) return *plan;
  }
  cache.emplace_back(m, std::make_shared<PlanHandle>(make_forward_plan(m)));
  return *cache.back().second;
}

}  // namespace

double fbm_covariance(HurstParameter h, double t, double s) {
  const double two_h = 2.0 * h.value();
  return 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) - std::pow(std::abs(t - s), two_h));
}

double fgn_autocovariance(HurstParameter h, long long lag) {
  const double two_h = 2.0 * h.value();
  const double k = std::abs(static_cast<double>(lag));
  if (k == 0.0) return 1.0;
  return 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) + std::pow(k - 1.0, two_h));
}

std::vector<double> cholesky_lower(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= l[j * n + k] * l[j * n + k];
    if (!(diag > 0.0)) {
      throw NumericalError("Cholesky factorization failed: leading minor " + std::to_string(j + 1) +
                           " of " + std::to_string(n) + " is not positive (pivot " +
                           std::to_string(diag) + ")");
    }
    const double ljj = std::sqrt(diag);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = v / ljj;
    }
  }
  return l;
}

FbmSampler::FbmSampler(HurstParameter h, const TimeGrid& grid, FbmMethod method)
    : h_(h), grid_(grid) {
  const std::size_t n = grid.n_steps();
  const double scale = std::pow(grid.dt(), 2.0 * h.value());

  if (method != FbmMethod::kCholesky) {
    const std::size_t m = 2 * n;
    std::vector<std::complex<double>> row(m), eig(m);
    for (std::size_t k = 0; k <= n; ++k) row[k] = fgn_autocovariance(h, static_cast<long long>(k));
    for (std::size_t k = 1; k < n; ++k) row[m - k] = row[k];
    execute(cached_plan(m), row, eig);

    double max_eig = 0.0;
    min_eigenvalue_ = eig[0].real();
    for (const auto& e : eig) {
      max_eig = std::max(max_eig, e.real());
      min_eigenvalue_ = std::min(min_eigenvalue_, e.real());
    }
    use_circulant_ = min_eigenvalue_ >= -1e-10 * max_eig;
    if (method == FbmMethod::kCirculant && !use_circulant_) {
      throw NumericalError("circulant embedding has a negative eigenvalue " +
                           std::to_string(min_eigenvalue_));
    }
    if (use_circulant_) {
      sqrt_eigen_.resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        sqrt_eigen_[k] = std::sqrt(std::max(0.0, eig[k].real()) * scale / static_cast<double>(m));
      }
      return;
    }
  }

  use_circulant_ = false;
  std::vector<double> cov(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cov[i * n + j] = scale * fgn_autocovariance(h, static_cast<long long>(i) - static_cast<long long>(j));
    }
  }
  cholesky_ = cholesky_lower(cov, n);
}

std::vector<double> FbmSampler::sample_increments(Engine& engine) const {
  const std::size_t n = grid_.n_steps();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);

  if (use_circulant_) {
    const std::size_t m = 2 * n;
    std::vector<std::complex<double>> w(m), y(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double re = normal(engine);
      const double im = normal(engine);
      w[k] = sqrt_eigen_[k] * std::complex<double>(re, im);
    }
    execute(cached_plan(m), w, y);
    for (std::size_t j = 0; j < n; ++j) out[j] = y[j].real();
    return out;
  }

  std::vector<double> z(n);
  for (auto& v : z) v = normal(engine);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k <= i; ++k) acc += cholesky_[i * n + k] * z[k];
    out[i] = acc;
  }
  return out;
}

FbmEnsemble FbmSampler::sample(std::size_t n_paths, std::uint64_t master_seed,
                               std::uint64_t replication, StreamPurpose purpose) const {
  if (n_paths == 0) throw ConfigError("sample_fbm needs at least one path");
  const std::size_t n = grid_.n_steps();
  FbmEnsemble ens{h_, grid_, PathMatrix(n_paths, n), PathMatrix(n_paths, n + 1)};
  for (std::size_t i = 0; i < n_paths; ++i) {
    Engine engine = make_engine({master_seed, replication, i, purpose});
    const auto inc = sample_increments(engine);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      ens.increments(i, j) = inc[j];
      acc += inc[j];
      ens.values(i, j + 1) = acc;
    }
  }
  return ens;
}

FbmEnsemble sample_fbm(HurstParameter h, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t master_seed, std::uint64_t replication, StreamPurpose purpose) {
  return FbmSampler(h, grid).sample(n_paths, master_seed, replication, purpose);
}

void write_fbm_csv(const FbmEnsemble& ensemble, std::ostream& out) {
  out << "path_index,node_index,time,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < ensemble.values.rows(); ++i) {
    for (std::size_t j = 0; j < ensemble.values.cols(); ++j) {
      out << i << ',' << j << ',' << ensemble.grid.node(j) << ',' << ensemble.values(i, j) << '\n';
    }
  }
}

}  // namespace fbmips
