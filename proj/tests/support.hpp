#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fbmips/drift_models.hpp"
#include "fbmips/fbm.hpp"
#include "fbmips/ips_sim.hpp"

namespace fbmips::testing {

inline std::shared_ptr<const FbmEnsemble> zero_noise(std::size_t n_paths, const TimeGrid& grid,
                                                     double h = 0.7) {
  auto e = std::make_shared<FbmEnsemble>();
  e->hurst = HurstParameter(h);
  e->grid = grid;
  e->increments = PathMatrix(n_paths, grid.n_steps());
  e->values = PathMatrix(n_paths, grid.n_nodes());
  return e;
}

inline std::shared_ptr<const ParticleEnsemble> simulate(const std::string& model, std::vector<double> theta,
                                                        double sigma, double h, const TimeGrid& grid,
                                                        std::size_t n, std::uint64_t seed,
                                                        const InitialCondition& initial = {}) {
  auto noise = std::make_shared<const FbmEnsemble>(sample_fbm(HurstParameter(h), grid, n, seed));
  const auto x0 = initial.draw(n, seed, 0);
  return std::make_shared<const ParticleEnsemble>(euler_simulate(model_by_key(model), theta, sigma, x0, noise));
}

inline std::shared_ptr<const ParticleEnsemble> simulate(const DriftModel& model, std::vector<double> theta,
                                                        double sigma, double h, const TimeGrid& grid,
                                                        std::size_t n, std::uint64_t seed,
                                                        const InitialCondition& initial = {}) {
  auto noise = std::make_shared<const FbmEnsemble>(sample_fbm(HurstParameter(h), grid, n, seed));
  const auto x0 = initial.draw(n, seed, 0);
  return std::make_shared<const ParticleEnsemble>(euler_simulate(model, theta, sigma, x0, noise));
}

// Measure-free model with p components b_m(x) and slopes d_x b_m(x).
inline DriftModel custom_model(std::string key, std::size_t p, std::function<double(std::size_t, double)> b,
                               std::function<double(std::size_t, double)> dxb, DriftMetadata meta = {}) {
  return DriftModel(
      std::move(key), p, [b](std::size_t m, double x, const MeasureSummary&) { return b(m, x); },
      [dxb](std::size_t m, double x, const MeasureSummary&) { return dxb(m, x); },
      [](std::size_t, double, const MeasureSummary&, double) { return 0.0; }, meta);
}

}  // namespace fbmips::testing
