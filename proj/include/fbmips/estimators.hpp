#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbmips/ips_sim.hpp"
#include "fbmips/kernels.hpp"
#include "fbmips/malliavin.hpp"

namespace fbmips {

/// How pathwise time and Riemann-Stieltjes integrals are discretized.
///
/// kForward uses left-point values, b(X_{t_j}) (X_{t_{j+1}} - X_{t_j}) and
/// b(X_{t_j})^2 dt, which is exactly consistent with the explicit Euler
/// scheme: the drift part of the numerator reproduces Psi_N theta. Its
/// phi-correction runs over cells strictly below the diagonal, since X_{t_j}
/// depends on noise increments before t_j only.
///
/// kTrapezoid uses endpoint averages for both; the diagonal half-cells then
/// enter the correction. Carries an O(theta^2 dt) drift bias on Euler data.
enum class IntegralRule { kForward, kTrapezoid };

Region correction_region(IntegralRule rule);

/// Drift components and their x-derivatives evaluated along an ensemble.
struct DriftTable {
  std::vector<PathMatrix> b;    // b[m](i, j)
  std::vector<PathMatrix> dxb;  // dxb[m](i, j)

  static DriftTable evaluate(const ParticleEnsemble& ensemble);
};

/// Psi_N with its spectral diagnostics.
struct PsiMatrix {
  Eigen::MatrixXd value;
  double condition_number = 0.0;
  double min_eigenvalue = 0.0;

  /// Psi^{-1} rhs; throws NumericalError when Psi is singular or its
  /// condition number exceeds 1e12.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
};

PsiMatrix compute_psi(const ParticleEnsemble& ensemble, IntegralRule rule = IntegralRule::kForward);
PsiMatrix compute_psi(const DriftTable& table, const TimeGrid& grid, IntegralRule rule);

/// sum_i int_0^T b(X^i_t, mu_t) o dX^i_t as Riemann-Stieltjes sums.
Eigen::VectorXd stratonovich_vector(const ParticleEnsemble& ensemble,
                                    IntegralRule rule = IntegralRule::kForward);
Eigen::VectorXd stratonovich_vector(const DriftTable& table, const PathMatrix& states,
                                    IntegralRule rule);

struct EstimationResult {
  std::string estimator;
  std::vector<double> theta_hat;
  std::size_t iterations = 0;
  bool converged = true;
  std::optional<double> contraction_c_t;
  std::map<std::string, double> diagnostics;
  std::vector<double> trajectory;  // fixed-point / iterative only

  nlohmann::json to_json() const;
};

/// Cartesian search grid for the discrete contrast.
struct ContrastGrid {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> mesh;

  void validate(std::size_t p) const;
  std::size_t points(std::size_t m) const;
  double node(std::size_t m, std::size_t k) const { return lo[m] + static_cast<double>(k) * mesh[m]; }
};

struct EstimatorSettings {
  IntegralRule rule = IntegralRule::kForward;
  double epsilon = 0.15;
  ShiftMode shift_mode = ShiftMode::kExact;
  double fp_tol = 1e-8;
  std::size_t fp_max_iter = 50;
  std::optional<double> theta_init;
  /// Iteration count of the iterative estimator; default floor(log N).
  std::optional<std::size_t> n_iters;
  ContrastGrid contrast_grid;
};

/// Ratio estimator: the Malliavin derivative is replaced by the
/// finite-difference ratio of initial-condition-shifted paths,
///   q_i(t) / max(q_i(s), 1),  q_i = (X^{i, x_0^i + eps} - X^i) / eps.
EstimationResult ratio_estimator(const ShiftedFamily& family, const EstimatorSettings& settings = {});

/// Result of check_contraction. `ok` is empty when model metadata lacks the
/// bounds needed to decide.
struct ContractionCheck {
  double c_t = 0.0;
  double t_max = 0.0;
  std::optional<bool> ok;
  std::string warning;
};

/// C_T = (|d_x b|_inf^2 / l^2) (2H-1)/(2H+1) T^{2H} sigma and the horizon
/// T_max at which C_T reaches 1.
ContractionCheck check_contraction(const DriftModel& model, HurstParameter h, double sigma, double horizon);

/// F_N for p = 1:
///   F_N(theta) = Psi^{-1} [ S - sum_i iint_{s<t} d_x b(X^i_t) sigma
///                              exp(theta (A^i(t) - A^i(s))) phi(t, s) ds dt ]
/// with A^i the unit-slope cumulative of d_x b along particle i. Everything
/// except the exponential is precomputed, so each evaluation is one pass of
/// separable kernel sums per particle.
class FixedPointMap {
 public:
  FixedPointMap(const ParticleEnsemble& ensemble, HurstParameter h,
                IntegralRule rule = IntegralRule::kForward);

  double operator()(double theta) const;
  double psi() const { return psi_; }
  double stratonovich() const { return strat_; }
  /// Correction integral at theta (before dividing by Psi).
  double correction(double theta) const;

 private:
  std::optional<KernelWeights> weights_;
  Region region_;
  double sigma_;
  double psi_ = 0.0;
  double strat_ = 0.0;
  PathMatrix dxb_;
  PathMatrix cumulative_;
};

double fixed_point_map(const ParticleEnsemble& ensemble, HurstParameter h, double theta,
                       IntegralRule rule = IntegralRule::kForward);

EstimationResult fixed_point_estimator(const ParticleEnsemble& ensemble, HurstParameter h,
                                       const EstimatorSettings& settings = {});

EstimationResult iterative_estimator(const ParticleEnsemble& ensemble, HurstParameter h,
                                     std::size_t n_iters, std::optional<double> theta_init = {},
                                     IntegralRule rule = IntegralRule::kForward);

/// floor(log N), at least 1.
std::size_t default_iteration_count(std::size_t n_particles);

/// Q_n^N(theta) = sum_j sum_i [ (dX - dt <theta, b(X_j, mu_j)>)^2 - dt^{2H} ].
double contrast_value(const ParticleEnsemble& observations, HurstParameter h,
                      std::span<const double> theta);

/// Minimizer of the quadratic contrast without grid restriction.
std::vector<double> least_squares_minimizer(const ParticleEnsemble& observations);

/// Exhaustive grid argmin of Q_n^N; ties go to the lexicographically
/// smallest theta.
EstimationResult contrast_estimator(const ParticleEnsemble& observations, HurstParameter h,
                                    const ContrastGrid& grid);

}  // namespace fbmips
