#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbmips/ips_sim.hpp"

namespace fbmips {

/// D^j_s X^i_t over all t-nodes for selected (i, j), s fixed.
struct DerivativePanel {
  TimeGrid grid{1.0, 1};
  std::size_t s_index = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> entries;

  const std::vector<double>& at(std::size_t i, std::size_t j) const { return entries.at({i, j}); }
};

/// Integrates the linear derivative system along an interacting ensemble:
///
///   Y^k_{l+1} = Y^k_l + dt [ <theta, d_x b(X^k_l, mu_l)> Y^k_l
///                           + (1/N) sum_r <theta, d_mu b(X^k_l, mu_l)(X^r_l)> Y^r_l ]
///
/// from node `start` with Y^k_start = scale * 1{k == j}. With scale = sigma
/// this is the Malliavin column D^j_s X; with start = 0, scale = 1 it is the
/// initial-condition derivative d X / d x_0^j. Columns are cached.
class DerivativeSolver {
 public:
  DerivativeSolver(const ParticleEnsemble& ensemble, std::span<const double> theta);

  /// N x (n+1) matrix of D^j_{s} X^k_t with s = t_{s_index}; zero before s.
  const PathMatrix& malliavin_column(std::size_t s_index, std::size_t j);
  /// N x (n+1) matrix of d X^k_t / d x_0^j.
  PathMatrix initial_condition_column(std::size_t j) const;

 private:
  PathMatrix integrate(std::size_t start, std::size_t j, double scale) const;

  const ParticleEnsemble& ensemble_;
  std::vector<double> theta_;
  PathMatrix slope_;        // <theta, d_x b(X^k_l, mu_l)>
  bool fast_measure_ = false;
  PathMatrix measure_slope_;  // <theta, d_mu b(X^k_l, mu_l)(.)> when independent of v
  std::map<std::pair<std::size_t, std::size_t>, PathMatrix> cache_;
};

DerivativePanel malliavin_interacting(const ParticleEnsemble& ensemble, std::span<const double> theta,
                                      std::size_t s_index,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// d X^i_t / d x_0^j for all i and t (N x (n+1)).
PathMatrix initial_condition_derivative(const ParticleEnsemble& ensemble,
                                        std::span<const double> theta, std::size_t shift_particle);

/// How the surrogate accumulates the drift slope on the grid.
enum class SurrogateKind {
  /// sigma * exp(sum_{s<=l<t} dt <theta, d_x b>), the continuous-time form.
  kExponential,
  /// sigma * prod (1 + dt <theta, d_x b>): what the explicit Euler derivative
  /// recursion yields without interaction. Used to compare like with like.
  kEulerProduct,
};

/// Z^i_{s,t} = sigma * exp(A^i(t) - A^i(s)) with per-particle cumulative A^i.
class ExponentialSurrogate {
 public:
  ExponentialSurrogate(double sigma, PathMatrix cumulative)
      : sigma_(sigma), cumulative_(std::move(cumulative)) {}

  double sigma() const { return sigma_; }
  const PathMatrix& cumulative() const { return cumulative_; }
  std::span<const double> cumulative(std::size_t i) const { return cumulative_.row(i); }
  double value(std::size_t i, std::size_t s_index, std::size_t t_index) const;

 private:
  double sigma_;
  PathMatrix cumulative_;
};

ExponentialSurrogate exponential_surrogate(const ParticleEnsemble& ensemble,
                                           std::span<const double> theta,
                                           SurrogateKind kind = SurrogateKind::kExponential);

/// D_s Xbar^i_t for the independent (limit-proxy) particles. Off-diagonal
/// derivatives vanish identically.
ExponentialSurrogate malliavin_independent(const ParticleEnsemble& limit_paths,
                                           std::span<const double> theta,
                                           SurrogateKind kind = SurrogateKind::kExponential);

struct PocRow {
  std::string quantity;
  std::size_t n_particles = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
};

struct PocSettings {
  std::vector<std::size_t> n_list{10, 20, 40, 80};
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  /// s-nodes (as fractions of the horizon) where derivative gaps are taken.
  std::vector<double> s_fractions{0.0, 0.5};
  std::size_t threads = 1;
};

/// Monte Carlo rate table. Quantities:
///   particle_gap       E sup_t |X^{i,N} - Xbar^i|
///   offdiag_malliavin  sup_t |D^j_s X^{i,N}|, j != i
///   diag_malliavin_gap E sup_t |D^i_s X^{i,N} - D^i_s Xbar^i|
///   surrogate_gap      max_{i,s,t} |D^i_s X^{i,N}_t - Z^i_{s,t}|
/// Each with a log-log slope against N.
std::vector<PocRow> poc_rate_report(const DriftModel& model, std::span<const double> theta,
                                    double sigma, HurstParameter h, const TimeGrid& grid,
                                    const InitialCondition& initial, const PocSettings& settings);

void write_poc_csv(const std::vector<PocRow>& rows, std::ostream& out);

/// Ordinary least squares slope of log(y) on log(x) with its standard error.
std::pair<double, double> loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace fbmips
