#include "fbmips/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbmips/error.hpp"

namespace fbmips {

Region correction_region(IntegralRule rule) {
  return rule == IntegralRule::kForward ? Region::kStrictLower : Region::kLowerTriangle;
}

DriftTable DriftTable::evaluate(const ParticleEnsemble& ensemble) {
  const DriftModel& model = ensemble.model;
  const std::size_t n_particles = ensemble.n_particles();
  const std::size_t nodes = ensemble.grid.n_nodes();
  DriftTable table;
  table.b.assign(model.p(), PathMatrix(n_particles, nodes));
  table.dxb.assign(model.p(), PathMatrix(n_particles, nodes));
  for (std::size_t i = 0; i < n_particles; ++i) {
    for (std::size_t j = 0; j < nodes; ++j) {
      const double x = ensemble.states(i, j);
      const auto& mu = ensemble.measures[j];
      for (std::size_t m = 0; m < model.p(); ++m) {
        table.b[m](i, j) = model.b(m, x, mu);
        table.dxb[m](i, j) = model.dxb(m, x, mu);
      }
    }
  }
  return table;
}

Eigen::VectorXd PsiMatrix::solve(const Eigen::VectorXd& rhs) const {
  if (!(min_eigenvalue > 0.0) || !(condition_number <= 1e12)) {
    std::ostringstream msg;
    msg << "Psi_N is singular or ill-conditioned (condition number " << condition_number
        << ", smallest eigenvalue " << min_eigenvalue
        << "); review the identifiability of the drift components";
    throw NumericalError(msg.str());
  }
  return value.ldlt().solve(rhs);
}

PsiMatrix compute_psi(const DriftTable& table, const TimeGrid& grid, IntegralRule rule) {
  const std::size_t p = table.b.size();
  const std::size_t n_particles = table.b[0].rows();
  const std::size_t n_steps = grid.n_steps();
  const double dt = grid.dt();
  PsiMatrix psi;
  psi.value = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t l = 0; l < p; ++l) {
    for (std::size_t m = l; m < p; ++m) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_particles; ++i) {
        const auto bl = table.b[l].row(i);
        const auto bm = table.b[m].row(i);
        if (rule == IntegralRule::kForward) {
          for (std::size_t j = 0; j < n_steps; ++j) acc += bl[j] * bm[j];
        } else {
          for (std::size_t j = 0; j < n_steps; ++j) acc += 0.5 * (bl[j] * bm[j] + bl[j + 1] * bm[j + 1]);
        }
      }
      psi.value(l, m) = psi.value(m, l) = acc * dt;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(psi.value, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  psi.min_eigenvalue = ev.minCoeff();
  const double max_abs = ev.cwiseAbs().maxCoeff();
  const double min_abs = ev.cwiseAbs().minCoeff();
  psi.condition_number = min_abs > 0.0 ? max_abs / min_abs : std::numeric_limits<double>::infinity();
  return psi;
}

PsiMatrix compute_psi(const ParticleEnsemble& ensemble, IntegralRule rule) {
  return compute_psi(DriftTable::evaluate(ensemble), ensemble.grid, rule);
}

Eigen::VectorXd stratonovich_vector(const DriftTable& table, const PathMatrix& states,
                                    IntegralRule rule) {
  const std::size_t p = table.b.size();
  const std::size_t n_steps = states.cols() - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t m = 0; m < p; ++m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < states.rows(); ++i) {
      const auto b = table.b[m].row(i);
      const auto x = states.row(i);
      if (rule == IntegralRule::kForward) {
        for (std::size_t j = 0; j < n_steps; ++j) acc += b[j] * (x[j + 1] - x[j]);
      } else {
        for (std::size_t j = 0; j < n_steps; ++j) acc += 0.5 * (b[j] + b[j + 1]) * (x[j + 1] - x[j]);
      }
    }
    out(static_cast<Eigen::Index>(m)) = acc;
  }
  return out;
}

Eigen::VectorXd stratonovich_vector(const ParticleEnsemble& ensemble, IntegralRule rule) {
  return stratonovich_vector(DriftTable::evaluate(ensemble), ensemble.states, rule);
}

nlohmann::json EstimationResult::to_json() const {
  nlohmann::json j;
  j["estimator"] = estimator;
  j["theta_hat"] = theta_hat;
  j["iterations"] = iterations;
  j["converged"] = converged;
  nlohmann::json diag = nlohmann::json::object();
  for (const auto& [k, v] : diagnostics) diag[k] = v;
  if (contraction_c_t) diag["contraction_C_T"] = *contraction_c_t;
  j["diagnostics"] = diag;
  return j;
}

void ContrastGrid::validate(std::size_t p) const {
  if (lo.size() != p || hi.size() != p || mesh.size() != p) {
    throw ConfigError("contrast grid needs lo, hi and mesh for each of the " + std::to_string(p) +
                      " parameter coordinates");
  }
  for (std::size_t m = 0; m < p; ++m) {
    if (!(lo[m] <= hi[m])) throw ConfigError("contrast grid: lo must not exceed hi");
    if (!(mesh[m] > 0.0)) throw ConfigError("contrast grid: mesh must be positive");
  }
}

std::size_t ContrastGrid::points(std::size_t m) const {
  return static_cast<std::size_t>(std::floor((hi[m] - lo[m]) / mesh[m] + 1e-9)) + 1;
}

namespace {

void require_estimable(const ParticleEnsemble& ensemble) {
  if (ensemble.external_measure) {
    throw ConfigError("estimators need observations of the interacting system");
  }
}

// Corrections vanish for Brownian noise; only then is H < 1/2 excluded too.
std::optional<KernelWeights> correction_weights(HurstParameter h, const TimeGrid& grid) {
  if (h.value() < 0.5) {
    throw ConfigError("the estimators require H >= 1/2 (got " + std::to_string(h.value()) + ")");
  }
  if (h.is_brownian()) return std::nullopt;
  return build_kernel_weights(h, grid);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

EstimationResult ratio_estimator(const ShiftedFamily& family, const EstimatorSettings& settings) {
  if (!family.base || !family.base->noise) throw ConfigError("ratio estimator needs a shifted family");
  const ParticleEnsemble& ens = *family.base;
  require_estimable(ens);
  if (!(family.epsilon > 0.0)) throw ConfigError("ratio estimator needs epsilon > 0");
  const HurstParameter h = ens.noise->hurst;
  const auto weights = correction_weights(h, ens.grid);

  const DriftTable table = DriftTable::evaluate(ens);
  const PsiMatrix psi = compute_psi(table, ens.grid, settings.rule);
  const Eigen::VectorXd strat = stratonovich_vector(table, ens.states, settings.rule);

  const std::size_t p = ens.model.p();
  const std::size_t n_particles = ens.n_particles();
  const std::size_t nodes = ens.grid.n_nodes();
  Eigen::VectorXd correction = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (weights) {
    const Region region = correction_region(settings.rule);
    std::vector<double> u(nodes), v(nodes), q(nodes);
    for (std::size_t i = 0; i < n_particles; ++i) {
      const auto base = ens.states.row(i);
      const auto shifted = family.shifted_row(i);
      for (std::size_t t = 0; t < nodes; ++t) {
        q[t] = (shifted[t] - base[t]) / family.epsilon;
        v[t] = 1.0 / std::max(q[t], 1.0);
      }
      for (std::size_t m = 0; m < p; ++m) {
        const auto dxb = table.dxb[m].row(i);
        for (std::size_t t = 0; t < nodes; ++t) u[t] = dxb[t] * q[t] * ens.sigma;
        const double c = double_integral_separable(u, v, *weights, region);
        if (!std::isfinite(c)) {
          throw NumericalError("non-finite ratio correction for particle " + std::to_string(i));
        }
        correction(static_cast<Eigen::Index>(m)) += c;
      }
    }
  }

  EstimationResult result;
  result.estimator = "ratio";
  result.theta_hat = to_std(psi.solve(strat - correction));
  result.diagnostics["psi_condition"] = psi.condition_number;
  result.diagnostics["epsilon"] = family.epsilon;
  for (std::size_t m = 0; m < p; ++m) {
    result.diagnostics["correction_" + std::to_string(m)] = correction(static_cast<Eigen::Index>(m));
  }
  return result;
}

ContractionCheck check_contraction(const DriftModel& model, HurstParameter h, double sigma,
                                   double horizon) {
  ContractionCheck out;
  const auto& meta = model.metadata();
  if (!meta.dxb_sup || !meta.drift_lower) {
    out.warning = "model '" + model.key() +
                  "' does not declare sup|d_x b| and a lower bound l on |b|; contraction unknown";
    return out;
  }
  const double hv = h.value();
  const double ratio = (*meta.dxb_sup * *meta.dxb_sup) / (*meta.drift_lower * *meta.drift_lower);
  if (hv == 0.5) {
    out.c_t = 0.0;
    out.t_max = std::numeric_limits<double>::infinity();
    out.ok = true;
    return out;
  }
  const double shape = (2.0 * hv - 1.0) / (2.0 * hv + 1.0);
  out.c_t = ratio * shape * std::pow(horizon, 2.0 * hv) * sigma;
  out.t_max = std::pow(1.0 / (ratio * sigma * shape), 1.0 / (2.0 * hv));
  out.ok = out.c_t < 1.0 - 1e-12;
  if (meta.dxb_nonpositive != true) {
    out.warning = "model '" + model.key() + "' does not declare d_x b <= 0; the bound may not apply";
  }
  return out;
}

FixedPointMap::FixedPointMap(const ParticleEnsemble& ensemble, HurstParameter h, IntegralRule rule)
    : weights_(correction_weights(h, ensemble.grid)),
      region_(correction_region(rule)),
      sigma_(ensemble.sigma) {
  require_estimable(ensemble);
  if (ensemble.model.p() != 1) {
    throw ConfigError("the fixed-point estimator is restricted to p = 1 (model '" +
                      ensemble.model.key() + "' has p = " + std::to_string(ensemble.model.p()) + ")");
  }
  const DriftTable table = DriftTable::evaluate(ensemble);
  const PsiMatrix psi = compute_psi(table, ensemble.grid, rule);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  psi_ = 1.0 / psi.solve(one)(0);
  strat_ = stratonovich_vector(table, ensemble.states, rule)(0);
  dxb_ = table.dxb[0];
  const double unit = 1.0;
  cumulative_ = exponential_surrogate(ensemble, std::span<const double>(&unit, 1)).cumulative();
}

double FixedPointMap::correction(double theta) const {
  if (!weights_) return 0.0;
  const std::size_t n_particles = dxb_.rows();
  const std::size_t nodes = dxb_.cols();
  std::vector<double> u(nodes), v(nodes);
  double total = 0.0;
  for (std::size_t i = 0; i < n_particles; ++i) {
    const auto a = cumulative_.row(i);
    const auto dxb = dxb_.row(i);
    const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    const double centre = 0.5 * (*lo + *hi);
    double part;
    if (std::abs(theta) * (*hi - *lo) < 600.0) {
      for (std::size_t t = 0; t < nodes; ++t) {
        const double e = theta * (a[t] - centre);
        u[t] = dxb[t] * sigma_ * std::exp(e);
        v[t] = std::exp(-e);
      }
      part = double_integral_separable(u, v, *weights_, region_);
    } else {
      part = double_integral(
          [&](std::size_t t, std::size_t s) { return dxb[t] * sigma_ * std::exp(theta * (a[t] - a[s])); },
          *weights_, region_);
    }
    total += part;
  }
  return total;
}

double FixedPointMap::operator()(double theta) const {
  const double value = (strat_ - correction(theta)) / psi_;
  if (!std::isfinite(value)) throw NumericalError("fixed-point map is not finite at theta = " + std::to_string(theta));
  return value;
}

double fixed_point_map(const ParticleEnsemble& ensemble, HurstParameter h, double theta,
                       IntegralRule rule) {
  return FixedPointMap(ensemble, h, rule)(theta);
}

std::size_t default_iteration_count(std::size_t n_particles) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::log(static_cast<double>(n_particles)))));
}

EstimationResult fixed_point_estimator(const ParticleEnsemble& ensemble, HurstParameter h,
                                       const EstimatorSettings& settings) {
  const FixedPointMap map(ensemble, h, settings.rule);
  const ContractionCheck contraction = check_contraction(ensemble.model, h, ensemble.sigma,
                                                         ensemble.grid.horizon());
  double theta = settings.theta_init ? *settings.theta_init : least_squares_minimizer(ensemble)[0];

  EstimationResult result;
  result.estimator = "fixed_point";
  result.contraction_c_t = contraction.c_t;
  result.diagnostics["T_max"] = contraction.t_max;
  result.diagnostics["contraction_ok"] = contraction.ok.value_or(false) ? 1.0 : 0.0;
  result.trajectory.push_back(theta);
  result.converged = false;

  double previous_residual = std::numeric_limits<double>::infinity();
  std::size_t growth = 0;
  for (std::size_t k = 0; k < settings.fp_max_iter; ++k) {
    const double next = map(theta);
    const double residual = std::abs(next - theta);
    result.trajectory.push_back(next);
    result.diagnostics["residual"] = residual;
    result.diagnostics["map_evaluations"] = static_cast<double>(k + 1);
    theta = next;
    result.iterations = k + 1;
    if (residual < settings.fp_tol) {
      result.converged = true;
      break;
    }
    growth = residual > previous_residual ? growth + 1 : 0;
    previous_residual = residual;
    if (growth >= 5) {
      std::ostringstream msg;
      msg << "fixed-point iteration diverges; trajectory:";
      for (double t : result.trajectory) msg << ' ' << t;
      throw NumericalError(msg.str());
    }
  }
  result.theta_hat = {theta};
  return result;
}

EstimationResult iterative_estimator(const ParticleEnsemble& ensemble, HurstParameter h,
                                     std::size_t n_iters, std::optional<double> theta_init,
                                     IntegralRule rule) {
  if (n_iters == 0) throw ConfigError("iterative estimator needs at least one iteration");
  const FixedPointMap map(ensemble, h, rule);
  double theta = theta_init ? *theta_init : least_squares_minimizer(ensemble)[0];
  EstimationResult result;
  result.estimator = "iterative";
  result.trajectory.push_back(theta);
  for (std::size_t k = 0; k < n_iters; ++k) {
    theta = map(theta);
    result.trajectory.push_back(theta);
  }
  result.iterations = n_iters;
  result.theta_hat = {theta};
  result.diagnostics["last_step"] = std::abs(result.trajectory[n_iters] - result.trajectory[n_iters - 1]);
  return result;
}

double contrast_value(const ParticleEnsemble& observations, HurstParameter h,
                      std::span<const double> theta) {
  if (theta.size() != observations.model.p()) throw ConfigError("theta length does not match model");
  const double dt = observations.grid.dt();
  const double offset = std::pow(dt, 2.0 * h.value());
  double q = 0.0;
  for (std::size_t j = 0; j < observations.grid.n_steps(); ++j) {
    const auto& mu = observations.measures[j];
    for (std::size_t i = 0; i < observations.n_particles(); ++i) {
      const double x = observations.states(i, j);
      const double r = observations.states(i, j + 1) - x - dt * observations.model.drift(theta, x, mu);
      q += r * r - offset;
    }
  }
  return q;
}

namespace {

// Sufficient statistics of the quadratic contrast:
//   Q(theta) = sxx - 2 dt theta.sxb + dt^2 theta' sbb theta - n N dt^{2H}.
struct ContrastStats {
  double sxx = 0.0;
  Eigen::VectorXd sxb;
  Eigen::MatrixXd sbb;
};

ContrastStats contrast_stats(const ParticleEnsemble& obs) {
  const std::size_t p = obs.model.p();
  ContrastStats st;
  st.sxb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  st.sbb = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd b(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < obs.grid.n_steps(); ++j) {
    const auto& mu = obs.measures[j];
    for (std::size_t i = 0; i < obs.n_particles(); ++i) {
      const double x = obs.states(i, j);
      const double dx = obs.states(i, j + 1) - x;
      for (std::size_t m = 0; m < p; ++m) b(static_cast<Eigen::Index>(m)) = obs.model.b(m, x, mu);
      st.sxx += dx * dx;
      st.sxb += dx * b;
      st.sbb += b * b.transpose();
    }
  }
  return st;
}

}  // namespace

std::vector<double> least_squares_minimizer(const ParticleEnsemble& observations) {
  const ContrastStats st = contrast_stats(observations);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(st.sbb);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw NumericalError("least-squares normal matrix is singular");
  }
  return to_std(ldlt.solve(st.sxb) / observations.grid.dt());
}

EstimationResult contrast_estimator(const ParticleEnsemble& observations, HurstParameter h,
                                    const ContrastGrid& grid) {
  require_estimable(observations);
  const std::size_t p = observations.model.p();
  grid.validate(p);
  const ContrastStats st = contrast_stats(observations);
  const double dt = observations.grid.dt();
  const double offset = static_cast<double>(observations.grid.n_steps() * observations.n_particles()) *
                        std::pow(dt, 2.0 * h.value());

  std::vector<std::size_t> index(p, 0);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p));
  Eigen::VectorXd best_theta;
  double best = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
  // Odometer over the grid, last coordinate fastest: lexicographic order, so
  // a strict comparison keeps the smallest theta among ties.
  for (;;) {
    for (std::size_t m = 0; m < p; ++m) theta(static_cast<Eigen::Index>(m)) = grid.node(m, index[m]);
    const double q = st.sxx - 2.0 * dt * theta.dot(st.sxb) + dt * dt * theta.dot(st.sbb * theta) - offset;
    ++evaluated;
    if (q < best) {
      best = q;
      best_theta = theta;
    }
    std::size_t m = p;
    while (m > 0) {
      --m;
      if (++index[m] < grid.points(m)) break;
      index[m] = 0;
      if (m == 0) {
        m = p + 1;
        break;
      }
    }
    if (m == p + 1) break;
  }

  EstimationResult result;
  result.estimator = "contrast";
  result.theta_hat = to_std(best_theta);
  result.diagnostics["q_min"] = contrast_value(observations, h, result.theta_hat);
  result.diagnostics["grid_points"] = static_cast<double>(evaluated);
  try {
    const auto ls = least_squares_minimizer(observations);
    for (std::size_t m = 0; m < p; ++m) result.diagnostics["ls_theta_" + std::to_string(m)] = ls[m];
  } catch (const NumericalError&) {
    // Degenerate normal matrix: the grid answer stands on its own.
  }
  return result;
}

}  // namespace fbmips
