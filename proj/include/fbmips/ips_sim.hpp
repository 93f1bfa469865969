#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "fbmips/drift_models.hpp"
#include "fbmips/fbm.hpp"
#include "fbmips/grid.hpp"

namespace fbmips {

/// Law of the initial positions x_0^i.
struct InitialCondition {
  enum class Kind { kStandardNormal, kConstant, kValues };
  Kind kind = Kind::kStandardNormal;
  double constant = 0.0;
  std::vector<double> values;

  static InitialCondition standard_normal() { return {}; }
  static InitialCondition fixed(double c) { return {Kind::kConstant, c, {}}; }
  static InitialCondition list(std::vector<double> v) { return {Kind::kValues, 0.0, std::move(v)}; }

  /// Draws N positions; particle i uses its own substream.
  std::vector<double> draw(std::size_t n, std::uint64_t master_seed, std::uint64_t replication,
                           StreamPurpose purpose = StreamPurpose::kInitial) const;
};

/// Simulated particle system: states(i, j) = X^{i,N}_{t_j}.
struct ParticleEnsemble {
  DriftModel model;
  std::vector<double> theta;
  double sigma = 1.0;
  TimeGrid grid{1.0, 1};
  PathMatrix states;
  /// Measure each drift evaluation at node j used. For interacting systems
  /// this is the empirical measure of column j; for the limit proxy it is
  /// the reference ensemble's measure.
  std::vector<MeasureSummary> measures;
  bool external_measure = false;
  std::shared_ptr<const FbmEnsemble> noise;

  std::size_t n_particles() const { return states.rows(); }
  /// Same observations restricted to [0, t_m].
  ParticleEnsemble truncated(std::size_t m) const;
};

/// Explicit Euler scheme:
///   X_{j+1} = X_j + dt * <theta, b(X_j, mu_j)> + sigma * dB_j.
ParticleEnsemble euler_simulate(const DriftModel& model, std::span<const double> theta, double sigma,
                                std::span<const double> initial,
                                std::shared_ptr<const FbmEnsemble> noise);

enum class ShiftMode { kExact, kFrozen };

/// For each k, the system re-evolved on the base noise with x_0^k += epsilon.
struct ShiftedFamily {
  std::shared_ptr<const ParticleEnsemble> base;
  double epsilon = 0.0;
  ShiftMode mode = ShiftMode::kExact;
  /// shifted_states[k] is the full N x (n+1) state matrix of system k. In
  /// frozen mode only row k differs from the base.
  std::vector<PathMatrix> shifted_states;

  std::span<const double> shifted_row(std::size_t k) const { return shifted_states[k].row(k); }
};

/// exact: N full re-simulations sharing base noise, O(N^2 n).
/// frozen: only particle k is re-evolved against base's measures, O(N n).
ShiftedFamily simulate_shifted_family(std::shared_ptr<const ParticleEnsemble> base, double epsilon,
                                      ShiftMode mode = ShiftMode::kExact);

/// Coupled independent-particle proxy for the McKean-Vlasov limit. An
/// auxiliary n_ref-particle system on independent noise provides the
/// reference measures; the tracked particles reuse `noise` and `initial` of
/// the interacting system but feel only the reference measure.
struct LimitProxy {
  ParticleEnsemble tracked;
  ParticleEnsemble reference;
};

LimitProxy simulate_limit_proxy(const DriftModel& model, std::span<const double> theta, double sigma,
                                std::span<const double> initial,
                                std::shared_ptr<const FbmEnsemble> noise, std::size_t n_ref,
                                const InitialCondition& reference_law, std::uint64_t master_seed,
                                std::uint64_t replication);

std::size_t default_reference_size(std::size_t n_particles);

/// W_2 between two empirical measures on the line (sorted samples).
/// Unequal sizes use the quantile coupling on the common refinement.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

/// `particle,node,time,state` rows in (i, j) order.
void write_ensemble_csv(const ParticleEnsemble& ensemble, std::ostream& out);
void write_states_csv(const PathMatrix& states, const TimeGrid& grid, std::ostream& out);
/// Writes `<stem>_shift<k><ext>` next to `path` for every k; returns the paths.
std::vector<std::filesystem::path> write_family_csv(const ShiftedFamily& family,
                                                    const std::filesystem::path& path);

}  // namespace fbmips
