#include "fbmips/malliavin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "fbmips/error.hpp"
#include "fbmips/parallel.hpp"

namespace fbmips {

DerivativeSolver::DerivativeSolver(const ParticleEnsemble& ensemble, std::span<const double> theta)
    : ensemble_(ensemble), theta_(theta.begin(), theta.end()) {
  if (ensemble.external_measure) {
    throw ConfigError("derivative solver needs an interacting ensemble, not a limit proxy");
  }
  if (theta.size() != ensemble.model.p()) throw ConfigError("theta length does not match model");
  const std::size_t n_particles = ensemble.n_particles();
  const std::size_t nodes = ensemble.grid.n_nodes();
  const DriftModel& model = ensemble.model;
  slope_ = PathMatrix(n_particles, nodes);
  fast_measure_ = model.metadata().dmub_constant_in_v;
  if (fast_measure_) measure_slope_ = PathMatrix(n_particles, nodes);
  for (std::size_t k = 0; k < n_particles; ++k) {
    for (std::size_t l = 0; l < nodes; ++l) {
      const double x = ensemble.states(k, l);
      const auto& mu = ensemble.measures[l];
      slope_(k, l) = model.drift_dx(theta_, x, mu);
      if (fast_measure_) measure_slope_(k, l) = model.drift_dmu(theta_, x, mu, x);
    }
  }
}

PathMatrix DerivativeSolver::integrate(std::size_t start, std::size_t j, double scale) const {
  const std::size_t n_particles = ensemble_.n_particles();
  const std::size_t n_steps = ensemble_.grid.n_steps();
  const double dt = ensemble_.grid.dt();
  const double inv_n = 1.0 / static_cast<double>(n_particles);
  PathMatrix y(n_particles, n_steps + 1);
  y(j, start) = scale;
  std::vector<double> interaction(n_particles);
  for (std::size_t l = start; l < n_steps; ++l) {
    if (fast_measure_) {
      double total = 0.0;
      for (std::size_t r = 0; r < n_particles; ++r) total += y(r, l);
      for (std::size_t k = 0; k < n_particles; ++k) interaction[k] = measure_slope_(k, l) * total * inv_n;
    } else {
      const auto& mu = ensemble_.measures[l];
      for (std::size_t k = 0; k < n_particles; ++k) {
        const double xk = ensemble_.states(k, l);
        double acc = 0.0;
        for (std::size_t r = 0; r < n_particles; ++r) {
          if (y(r, l) == 0.0) continue;
          acc += ensemble_.model.drift_dmu(theta_, xk, mu, ensemble_.states(r, l)) * y(r, l);
        }
        interaction[k] = acc * inv_n;
      }
    }
    for (std::size_t k = 0; k < n_particles; ++k) {
      y(k, l + 1) = y(k, l) + dt * (slope_(k, l) * y(k, l) + interaction[k]);
    }
  }
  return y;
}

const PathMatrix& DerivativeSolver::malliavin_column(std::size_t s_index, std::size_t j) {
  if (s_index > ensemble_.grid.n_steps()) {
    throw ConfigError("s_index " + std::to_string(s_index) + " is outside the grid");
  }
  if (j >= ensemble_.n_particles()) throw ConfigError("particle index out of range");
  auto key = std::make_pair(s_index, j);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, integrate(s_index, j, ensemble_.sigma)).first;
  }
  return it->second;
}

PathMatrix DerivativeSolver::initial_condition_column(std::size_t j) const {
  if (j >= ensemble_.n_particles()) throw ConfigError("particle index out of range");
  return integrate(0, j, 1.0);
}

DerivativePanel malliavin_interacting(const ParticleEnsemble& ensemble, std::span<const double> theta,
                                      std::size_t s_index,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  DerivativeSolver solver(ensemble, theta);
  DerivativePanel panel{ensemble.grid, s_index, {}};
  for (const auto& [i, j] : pairs) {
    if (i >= ensemble.n_particles()) throw ConfigError("particle index out of range");
    const PathMatrix& column = solver.malliavin_column(s_index, j);
    const auto row = column.row(i);
    panel.entries[{i, j}] = std::vector<double>(row.begin(), row.end());
  }
  return panel;
}

PathMatrix initial_condition_derivative(const ParticleEnsemble& ensemble,
                                        std::span<const double> theta, std::size_t shift_particle) {
  return DerivativeSolver(ensemble, theta).initial_condition_column(shift_particle);
}

double ExponentialSurrogate::value(std::size_t i, std::size_t s_index, std::size_t t_index) const {
  if (s_index > t_index) return 0.0;
  return sigma_ * std::exp(cumulative_(i, t_index) - cumulative_(i, s_index));
}

ExponentialSurrogate exponential_surrogate(const ParticleEnsemble& ensemble,
                                           std::span<const double> theta, SurrogateKind kind) {
  if (theta.size() != ensemble.model.p()) throw ConfigError("theta length does not match model");
  const std::size_t n_particles = ensemble.n_particles();
  const std::size_t n_steps = ensemble.grid.n_steps();
  const double dt = ensemble.grid.dt();
  PathMatrix cumulative(n_particles, n_steps + 1);
  for (std::size_t i = 0; i < n_particles; ++i) {
    double acc = 0.0;
    for (std::size_t l = 0; l < n_steps; ++l) {
      const double slope = ensemble.model.drift_dx(theta, ensemble.states(i, l), ensemble.measures[l]);
      if (kind == SurrogateKind::kExponential) {
        acc += dt * slope;
      } else {
        const double factor = 1.0 + dt * slope;
        if (!(factor > 0.0)) {
          throw NumericalError("Euler derivative factor is not positive at particle " +
                               std::to_string(i) + ", node " + std::to_string(l));
        }
        acc += std::log(factor);
      }
      cumulative(i, l + 1) = acc;
    }
  }
  return ExponentialSurrogate(ensemble.sigma, std::move(cumulative));
}

ExponentialSurrogate malliavin_independent(const ParticleEnsemble& limit_paths,
                                           std::span<const double> theta, SurrogateKind kind) {
  return exponential_surrogate(limit_paths, theta, kind);
}

std::pair<double, double> loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("loglog_slope needs at least two matching points");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> lx(n), ly(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) return {nan, nan};
    lx[k] = std::log(x[k]);
    ly[k] = std::log(y[k]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  const double slope = sxy / sxx;
  if (n < 3) return {slope, nan};
  double rss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = ly[k] - my - slope * (lx[k] - mx);
    rss += r * r;
  }
  return {slope, std::sqrt(rss / static_cast<double>(n - 2) / sxx)};
}

namespace {

struct PocSample {
  double particle_gap = 0.0;
  double offdiag = 0.0;
  double diag_gap = 0.0;
  double surrogate_gap = 0.0;
};

PocSample poc_replication(const DriftModel& model, std::span<const double> theta, double sigma,
                          const FbmSampler& sampler, const InitialCondition& initial_law,
                          std::size_t n_particles, std::uint64_t seed, std::uint64_t rep,
                          const std::vector<std::size_t>& s_indices) {
  auto noise = std::make_shared<const FbmEnsemble>(sampler.sample(n_particles, seed, rep));
  const auto initial = initial_law.draw(n_particles, seed, rep);
  const ParticleEnsemble ens = euler_simulate(model, theta, sigma, initial, noise);
  const LimitProxy proxy = simulate_limit_proxy(model, theta, sigma, initial, noise,
                                                default_reference_size(n_particles), initial_law,
                                                seed, rep);
  const std::size_t nodes = ens.grid.n_nodes();
  PocSample out;
  for (std::size_t i = 0; i < n_particles; ++i) {
    double sup = 0.0;
    for (std::size_t t = 0; t < nodes; ++t) {
      sup = std::max(sup, std::abs(ens.states(i, t) - proxy.tracked.states(i, t)));
    }
    out.particle_gap += sup;
  }
  out.particle_gap /= static_cast<double>(n_particles);

  DerivativeSolver solver(ens, theta);
  const auto limit = malliavin_independent(proxy.tracked, theta, SurrogateKind::kEulerProduct);
  const auto surrogate = exponential_surrogate(ens, theta, SurrogateKind::kEulerProduct);
  for (std::size_t s : s_indices) {
    for (std::size_t j = 0; j < n_particles; ++j) {
      const PathMatrix& col = solver.malliavin_column(s, j);
      double off = 0.0, diag = 0.0;
      for (std::size_t t = s; t < nodes; ++t) {
        for (std::size_t i = 0; i < n_particles; ++i) {
          if (i != j) off = std::max(off, std::abs(col(i, t)));
        }
        diag = std::max(diag, std::abs(col(j, t) - limit.value(j, s, t)));
        out.surrogate_gap = std::max(out.surrogate_gap, std::abs(col(j, t) - surrogate.value(j, s, t)));
      }
      out.offdiag += off;
      out.diag_gap += diag;
    }
  }
  const double cells = static_cast<double>(s_indices.size() * n_particles);
  out.offdiag /= cells;
  out.diag_gap /= cells;
  return out;
}

}  // namespace

std::vector<PocRow> poc_rate_report(const DriftModel& model, std::span<const double> theta,
                                    double sigma, HurstParameter h, const TimeGrid& grid,
                                    const InitialCondition& initial, const PocSettings& settings) {
  if (settings.n_list.size() < 3) throw ConfigError("poc-check needs at least three values of N");
  if (settings.reps < 2) throw ConfigError("poc-check needs at least two replications");
  std::set<std::size_t> s_set;
  for (double f : settings.s_fractions) {
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("s fractions must lie in [0, 1)");
    s_set.insert(std::min<std::size_t>(static_cast<std::size_t>(std::lround(f * grid.n_steps())),
                                       grid.n_steps() - 1));
  }
  const std::vector<std::size_t> s_indices(s_set.begin(), s_set.end());
  const FbmSampler sampler(h, grid);

  static const char* kNames[] = {"particle_gap", "offdiag_malliavin", "diag_malliavin_gap",
                                 "surrogate_gap"};
  std::vector<PocRow> rows;
  std::vector<std::vector<double>> means(4), ns(4);
  for (std::size_t n_particles : settings.n_list) {
    std::vector<PocSample> samples(settings.reps);
    parallel_for(settings.reps, settings.threads, [&](std::size_t r) {
      samples[r] = poc_replication(model, theta, sigma, sampler, initial, n_particles, settings.seed,
                                   r, s_indices);
    });
    for (std::size_t q = 0; q < 4; ++q) {
      double sum = 0.0, sum2 = 0.0;
      for (const auto& s : samples) {
        const double v = q == 0 ? s.particle_gap : q == 1 ? s.offdiag : q == 2 ? s.diag_gap : s.surrogate_gap;
        sum += v;
        sum2 += v * v;
      }
      const double reps = static_cast<double>(settings.reps);
      const double mean = sum / reps;
      const double var = std::max(0.0, (sum2 - reps * mean * mean) / (reps - 1.0));
      rows.push_back({kNames[q], n_particles, mean, std::sqrt(var / reps), 0.0, 0.0});
      means[q].push_back(mean);
      ns[q].push_back(static_cast<double>(n_particles));
    }
  }
  for (std::size_t q = 0; q < 4; ++q) {
    const auto [slope, slope_se] = loglog_slope(ns[q], means[q]);
    for (auto& row : rows) {
      if (row.quantity == kNames[q]) {
        row.slope = slope;
        row.slope_stderr = slope_se;
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const PocRow& a, const PocRow& b) {
    return a.quantity < b.quantity;
  });
  return rows;
}

void write_poc_csv(const std::vector<PocRow>& rows, std::ostream& out) {
  out << "quantity,N,estimate,stderr,slope,slope_stderr\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.quantity << ',' << r.n_particles << ',' << r.estimate << ',' << r.stderr_ << ','
        << r.slope << ',' << r.slope_stderr << '\n';
  }
}

}  // namespace fbmips
