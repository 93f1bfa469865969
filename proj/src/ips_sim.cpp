#include "fbmips/ips_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "fbmips/error.hpp"

namespace fbmips {

namespace {

void check_finite(double v, std::size_t i, std::size_t j) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite state at particle " << i << ", node " << j << ": " << v;
    throw NumericalError(msg.str());
  }
}

// Row i of `states` evolved against fixed per-node measures.
void evolve_row_against(const DriftModel& model, std::span<const double> theta, double sigma,
                        const TimeGrid& grid, const std::vector<MeasureSummary>& measures,
                        std::span<const double> increments, double x0, std::span<double> row,
                        std::size_t particle_index) {
  const double dt = grid.dt();
  row[0] = x0;
  for (std::size_t j = 0; j < grid.n_steps(); ++j) {
    const double next = row[j] + dt * model.drift(theta, row[j], measures[j]) + sigma * increments[j];
    check_finite(next, particle_index, j + 1);
    row[j + 1] = next;
  }
}

// Interacting system; fills states and the per-node empirical measures.
void evolve_interacting(const DriftModel& model, std::span<const double> theta, double sigma,
                        const TimeGrid& grid, const PathMatrix& increments,
                        std::span<const double> initial, PathMatrix& states,
                        std::vector<MeasureSummary>* measures) {
  const std::size_t n_particles = initial.size();
  const double dt = grid.dt();
  std::vector<double> column(initial.begin(), initial.end());
  for (std::size_t i = 0; i < n_particles; ++i) {
    check_finite(column[i], i, 0);
    states(i, 0) = column[i];
  }
  std::vector<double> next(n_particles);
  for (std::size_t j = 0; j < grid.n_steps(); ++j) {
    MeasureSummary mu = MeasureSummary::from_positions(column);
    for (std::size_t i = 0; i < n_particles; ++i) {
      const double v = column[i] + dt * model.drift(theta, column[i], mu) + sigma * increments(i, j);
      check_finite(v, i, j + 1);
      next[i] = v;
      states(i, j + 1) = v;
    }
    if (measures) measures->push_back(std::move(mu));
    column.swap(next);
  }
  if (measures) measures->push_back(MeasureSummary::from_positions(column));
}

void validate_inputs(const DriftModel& model, std::span<const double> theta, double sigma,
                     std::span<const double> initial, const FbmEnsemble& noise) {
  if (theta.size() != model.p()) {
    throw ConfigError("theta has length " + std::to_string(theta.size()) + " but model '" +
                      model.key() + "' has p=" + std::to_string(model.p()));
  }
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
  if (initial.size() != noise.n_paths()) {
    throw ConfigError("initial condition count " + std::to_string(initial.size()) +
                      " does not match noise path count " + std::to_string(noise.n_paths()));
  }
  if (noise.grid.n_steps() < 2) throw ConfigError("simulation needs at least 2 time steps");
}

}  // namespace

std::vector<double> InitialCondition::draw(std::size_t n, std::uint64_t master_seed,
                                           std::uint64_t replication, StreamPurpose purpose) const {
  std::vector<double> out(n);
  switch (kind) {
    case Kind::kStandardNormal:
      for (std::size_t i = 0; i < n; ++i) {
        Engine engine = make_engine({master_seed, replication, i, purpose});
        out[i] = std::normal_distribution<double>(0.0, 1.0)(engine);
      }
      break;
    case Kind::kConstant:
      std::fill(out.begin(), out.end(), constant);
      break;
    case Kind::kValues:
      if (values.size() != n) {
        throw ConfigError("initial value list has " + std::to_string(values.size()) +
                          " entries, expected " + std::to_string(n));
      }
      out = values;
      break;
  }
  return out;
}

ParticleEnsemble ParticleEnsemble::truncated(std::size_t m) const {
  ParticleEnsemble out{model, theta, sigma, grid.truncated(m), states.leading_columns(m + 1),
                       std::vector<MeasureSummary>(measures.begin(), measures.begin() + m + 1),
                       external_measure, noise};
  return out;
}

ParticleEnsemble euler_simulate(const DriftModel& model, std::span<const double> theta, double sigma,
                                std::span<const double> initial,
                                std::shared_ptr<const FbmEnsemble> noise) {
  if (!noise) throw ConfigError("euler_simulate needs a noise ensemble");
  validate_inputs(model, theta, sigma, initial, *noise);
  const TimeGrid& grid = noise->grid;
  ParticleEnsemble ens{model,
                       std::vector<double>(theta.begin(), theta.end()),
                       sigma,
                       grid,
                       PathMatrix(initial.size(), grid.n_nodes()),
                       {},
                       false,
                       noise};
  ens.measures.reserve(grid.n_nodes());
  evolve_interacting(model, theta, sigma, grid, noise->increments, initial, ens.states, &ens.measures);
  return ens;
}

ShiftedFamily simulate_shifted_family(std::shared_ptr<const ParticleEnsemble> base, double epsilon,
                                      ShiftMode mode) {
  if (!base) throw ConfigError("shifted family needs a base ensemble");
  if (!(epsilon >= 0.0)) throw ConfigError("shift epsilon must be nonnegative");
  if (base->external_measure) throw ConfigError("shifted family requires an interacting base ensemble");
  const std::size_t n_particles = base->n_particles();
  ShiftedFamily family{base, epsilon, mode, {}};
  family.shifted_states.reserve(n_particles);

  std::vector<double> initial = base->states.column(0);
  for (std::size_t k = 0; k < n_particles; ++k) {
    PathMatrix states = base->states;
    if (mode == ShiftMode::kExact) {
      std::vector<double> shifted_initial = initial;
      shifted_initial[k] += epsilon;
      evolve_interacting(base->model, base->theta, base->sigma, base->grid, base->noise->increments,
                         shifted_initial, states, nullptr);
    } else {
      evolve_row_against(base->model, base->theta, base->sigma, base->grid, base->measures,
                         base->noise->increments.row(k), initial[k] + epsilon, states.row(k), k);
    }
    family.shifted_states.push_back(std::move(states));
  }
  return family;
}

std::size_t default_reference_size(std::size_t n_particles) {
  return std::max<std::size_t>(10 * n_particles, 300);
}

LimitProxy simulate_limit_proxy(const DriftModel& model, std::span<const double> theta, double sigma,
                                std::span<const double> initial,
                                std::shared_ptr<const FbmEnsemble> noise, std::size_t n_ref,
                                const InitialCondition& reference_law, std::uint64_t master_seed,
                                std::uint64_t replication) {
  if (!noise) throw ConfigError("limit proxy needs a noise ensemble");
  validate_inputs(model, theta, sigma, initial, *noise);
  if (n_ref == 0) throw ConfigError("reference ensemble size must be positive");

  auto ref_noise = std::make_shared<const FbmEnsemble>(FbmSampler(noise->hurst, noise->grid)
                                                           .sample(n_ref, master_seed, replication,
                                                                   StreamPurpose::kReference));
  // An explicit value list stands for its empirical law; recycle it.
  std::vector<double> ref_initial(n_ref);
  if (reference_law.kind == InitialCondition::Kind::kValues) {
    if (reference_law.values.empty()) throw ConfigError("empty initial value list");
    for (std::size_t r = 0; r < n_ref; ++r) {
      ref_initial[r] = reference_law.values[r % reference_law.values.size()];
    }
  } else {
    ref_initial = reference_law.draw(n_ref, master_seed, replication, StreamPurpose::kReferenceInitial);
  }
  ParticleEnsemble reference = euler_simulate(model, theta, sigma, ref_initial, ref_noise);

  const TimeGrid& grid = noise->grid;
  ParticleEnsemble tracked{model,
                           std::vector<double>(theta.begin(), theta.end()),
                           sigma,
                           grid,
                           PathMatrix(initial.size(), grid.n_nodes()),
                           reference.measures,
                           true,
                           noise};
  for (std::size_t i = 0; i < initial.size(); ++i) {
    check_finite(initial[i], i, 0);
    evolve_row_against(model, theta, sigma, grid, reference.measures, noise->increments.row(i),
                       initial[i], tracked.states.row(i), i);
  }
  return {std::move(tracked), std::move(reference)};
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein2_1d: empty sample");
  if (a.size() == b.size()) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(acc / static_cast<double>(a.size()));
  }
  // Merge the quantile breakpoints k/na and l/nb; on each piece both
  // quantile functions are constant.
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double u = 0.0, acc = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double next_a = static_cast<double>(ia + 1) / na;
    const double next_b = static_cast<double>(ib + 1) / nb;
    const double next = std::min(next_a, next_b);
    const double d = a[ia] - b[ib];
    acc += (next - u) * d * d;
    u = next;
    // Exact breakpoint comparison via integer cross-multiplication.
    const auto lhs = (ia + 1) * b.size();
    const auto rhs = (ib + 1) * a.size();
    if (lhs <= rhs) ++ia;
    if (rhs <= lhs) ++ib;
  }
  return std::sqrt(acc);
}

void write_states_csv(const PathMatrix& states, const TimeGrid& grid, std::ostream& out) {
  out << "particle,node,time,state\n";
  out.precision(17);
  for (std::size_t i = 0; i < states.rows(); ++i) {
    for (std::size_t j = 0; j < states.cols(); ++j) {
      out << i << ',' << j << ',' << grid.node(j) << ',' << states(i, j) << '\n';
    }
  }
}

void write_ensemble_csv(const ParticleEnsemble& ensemble, std::ostream& out) {
  write_states_csv(ensemble.states, ensemble.grid, out);
}

std::vector<std::filesystem::path> write_family_csv(const ShiftedFamily& family,
                                                    const std::filesystem::path& path) {
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < family.shifted_states.size(); ++k) {
    auto target = path.parent_path() /
                  (path.stem().string() + "_shift" + std::to_string(k) + path.extension().string());
    std::ofstream out(target);
    if (!out) throw ConfigError("cannot open " + target.string() + " for writing");
    write_states_csv(family.shifted_states[k], family.base->grid, out);
    written.push_back(std::move(target));
  }
  return written;
}

}  // namespace fbmips
