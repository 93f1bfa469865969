#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fbmips/drift_models.hpp"
#include "fbmips/grid.hpp"
#include "fbmips/ips_sim.hpp"

namespace fbmips {

struct VarianceSettings {
  std::size_t n_mc = 1000;
  /// Reference ensemble size for the limit measure; 0 picks max(n_mc, 1000).
  std::size_t n_ref = 0;
  InitialCondition initial;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// Monte Carlo estimates of the asymptotic variance constants on the limit
/// proxy. Matrices are p x p; the scalar block (v_tilde, sigma_bar2 and the
/// delta-method errors) is filled for p = 1 only.
struct VarianceEstimate {
  Eigen::MatrixXd psi;
  Eigen::MatrixXd psi_se;
  Eigen::MatrixXd sigma2;
  Eigen::MatrixXd sigma2_se;
  Eigen::MatrixXd sigma_tilde2;
  std::optional<double> sigma_tilde2_se;
  std::optional<double> v_tilde;
  std::optional<double> v_tilde_se;
  std::optional<double> sigma_bar2;
  std::optional<double> sigma_bar2_se;
  std::size_t n_mc = 0;

  nlohmann::json to_json() const;
};

/// Psi = int E[b b'] dt,
/// Sigma^2 = sigma^2 ( iint E[b_s b_t'] phi
///                     + iiiint E[D_v b(X_s) D_u b(X_t)'] phi(t,v) phi(s,u) ),
/// with D_v b(X_s) = d_x b(X_s) sigma exp(int_v^s <theta, d_x b>) 1{v <= s};
/// V~ = sigma iint_{s<t} E[d_x b(X_t) (int_s^t d_x b) exp(theta int_s^t d_x b)] phi;
/// Sigma~^2 = Psi^-1 Sigma^2 Psi^-1 and Sigma-bar^2 = (Sigma / (Psi - V~))^2.
VarianceEstimate asymptotic_variance_mc(const DriftModel& model, std::span<const double> theta0,
                                        double sigma, HurstParameter h, const TimeGrid& grid,
                                        const VarianceSettings& settings = {});

}  // namespace fbmips
