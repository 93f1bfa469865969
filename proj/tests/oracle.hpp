#pragma once

// Brute-force reference evaluations of the estimators. Cell masses come from
// second differences of the fBm covariance; every sum is written out
// explicitly over particles, cells and corners.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "fbmips/fbm.hpp"
#include "fbmips/ips_sim.hpp"

namespace fbmips::oracle {

enum class Rule { kForward, kTrapezoid };

inline double cell_mass(double h, const TimeGrid& g, std::size_t j, std::size_t k) {
  const HurstParameter hp(h);
  const double a0 = g.node(j), a1 = g.node(j + 1), b0 = g.node(k), b1 = g.node(k + 1);
  return fbm_covariance(hp, a1, b1) - fbm_covariance(hp, a1, b0) - fbm_covariance(hp, a0, b1) +
         fbm_covariance(hp, a0, b0);
}

// sum over cells below the diagonal of mass * corner average of f(t, s).
inline double lower_integral(const std::function<double(std::size_t, std::size_t)>& f, double h,
                             const TimeGrid& g, Rule rule) {
  double total = 0.0;
  for (std::size_t j = 0; j < g.n_steps(); ++j) {
    for (std::size_t k = 0; k <= j; ++k) {
      double w = cell_mass(h, g, j, k);
      if (j == k) {
        if (rule == Rule::kForward) continue;
        w *= 0.5;
      }
      const double avg = 0.25 * (f(j, k) + f(j + 1, k) + f(j, k + 1) + f(j + 1, k + 1));
      total += w * avg;
    }
  }
  return total;
}

inline MeasureSummary measure_at(const ParticleEnsemble& e, std::size_t j) {
  std::vector<double> col(e.n_particles());
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = e.states(i, j);
  return MeasureSummary::from_positions(col);
}

inline double b_at(const ParticleEnsemble& e, std::size_t m, std::size_t i, std::size_t j) {
  return e.model.b(m, e.states(i, j), measure_at(e, j));
}

inline double dxb_at(const ParticleEnsemble& e, std::size_t m, std::size_t i, std::size_t j) {
  return e.model.dxb(m, e.states(i, j), measure_at(e, j));
}

inline double psi(const ParticleEnsemble& e, std::size_t l, std::size_t m, Rule rule) {
  const double dt = e.grid.dt();
  double acc = 0.0;
  for (std::size_t i = 0; i < e.n_particles(); ++i) {
    for (std::size_t j = 0; j < e.grid.n_steps(); ++j) {
      const double left = b_at(e, l, i, j) * b_at(e, m, i, j);
      const double right = b_at(e, l, i, j + 1) * b_at(e, m, i, j + 1);
      acc += rule == Rule::kForward ? left * dt : 0.5 * (left + right) * dt;
    }
  }
  return acc;
}

inline double stratonovich(const ParticleEnsemble& e, std::size_t m, Rule rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < e.n_particles(); ++i) {
    for (std::size_t j = 0; j < e.grid.n_steps(); ++j) {
      const double dx = e.states(i, j + 1) - e.states(i, j);
      const double w = rule == Rule::kForward ? b_at(e, m, i, j) : 0.5 * (b_at(e, m, i, j) + b_at(e, m, i, j + 1));
      acc += w * dx;
    }
  }
  return acc;
}

// Solves the p x p system (p <= 2) by Cramer's rule.
inline std::vector<double> solve(const ParticleEnsemble& e, const std::vector<double>& rhs, Rule rule) {
  if (rhs.size() == 1) return {rhs[0] / psi(e, 0, 0, rule)};
  const double a = psi(e, 0, 0, rule), b = psi(e, 0, 1, rule), d = psi(e, 1, 1, rule);
  const double det = a * d - b * b;
  return {(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - b * rhs[0]) / det};
}

inline std::vector<double> ratio(const ShiftedFamily& fam, double h, Rule rule) {
  const ParticleEnsemble& e = *fam.base;
  std::vector<double> rhs;
  for (std::size_t m = 0; m < e.model.p(); ++m) {
    double corr = 0.0;
    for (std::size_t i = 0; i < e.n_particles(); ++i) {
      auto q = [&](std::size_t t) { return (fam.shifted_states[i](i, t) - e.states(i, t)) / fam.epsilon; };
      corr += lower_integral(
          [&](std::size_t t, std::size_t s) {
            const double denom = q(s) > 1.0 ? q(s) : 1.0;
            return dxb_at(e, m, i, t) * (q(t) / denom) * e.sigma;
          },
          h, e.grid, rule);
    }
    rhs.push_back(stratonovich(e, m, rule) - corr);
  }
  return solve(e, rhs, rule);
}

inline double fixed_point_map(const ParticleEnsemble& e, double h, double theta, Rule rule) {
  const double dt = e.grid.dt();
  double corr = 0.0;
  for (std::size_t i = 0; i < e.n_particles(); ++i) {
    auto a = [&](std::size_t t) {
      double acc = 0.0;
      for (std::size_t l = 0; l < t; ++l) acc += dt * dxb_at(e, 0, i, l);
      return acc;
    };
    corr += lower_integral(
        [&](std::size_t t, std::size_t s) { return dxb_at(e, 0, i, t) * e.sigma * std::exp(theta * (a(t) - a(s))); },
        h, e.grid, rule);
  }
  return (stratonovich(e, 0, rule) - corr) / psi(e, 0, 0, rule);
}

inline double least_squares(const ParticleEnsemble& e) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < e.n_particles(); ++i) {
    for (std::size_t j = 0; j < e.grid.n_steps(); ++j) {
      const double b = b_at(e, 0, i, j);
      num += b * (e.states(i, j + 1) - e.states(i, j));
      den += b * b * e.grid.dt();
    }
  }
  return num / den;
}

inline double iterate(const ParticleEnsemble& e, double h, double theta, std::size_t n, Rule rule) {
  for (std::size_t k = 0; k < n; ++k) theta = fixed_point_map(e, h, theta, rule);
  return theta;
}

inline double contrast(const ParticleEnsemble& e, double h, const std::vector<double>& theta) {
  const double dt = e.grid.dt();
  double q = 0.0;
  for (std::size_t j = 0; j < e.grid.n_steps(); ++j) {
    for (std::size_t i = 0; i < e.n_particles(); ++i) {
      double drift = 0.0;
      for (std::size_t m = 0; m < theta.size(); ++m) drift += theta[m] * b_at(e, m, i, j);
      const double r = e.states(i, j + 1) - e.states(i, j) - dt * drift;
      q += r * r - std::pow(dt, 2.0 * h);
    }
  }
  return q;
}

// Grid argmin by nested loops (p <= 2), first minimum in lexicographic order.
inline std::vector<double> contrast_argmin(const ParticleEnsemble& e, double h, const std::vector<double>& lo,
                                           const std::vector<double>& mesh, const std::vector<std::size_t>& points) {
  std::vector<double> best_theta;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t outer = points[0];
  const std::size_t inner = points.size() > 1 ? points[1] : 1;
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      std::vector<double> theta{lo[0] + static_cast<double>(a) * mesh[0]};
      if (points.size() > 1) theta.push_back(lo[1] + static_cast<double>(b) * mesh[1]);
      const double q = contrast(e, h, theta);
      if (q < best) {
        best = q;
        best_theta = theta;
      }
    }
  }
  return best_theta;
}

}  // namespace fbmips::oracle
