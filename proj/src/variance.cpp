#include "fbmips/variance.hpp"

#include <algorithm>
#include <cmath>

#include "fbmips/error.hpp"
#include "fbmips/estimators.hpp"
#include "fbmips/fbm.hpp"
#include "fbmips/kernels.hpp"
#include "fbmips/malliavin.hpp"
#include "fbmips/parallel.hpp"

namespace fbmips {

namespace {

struct PathTerms {
  Eigen::MatrixXd psi;
  Eigen::MatrixXd sigma2;
  double v_tilde = 0.0;
};

// Cell-level Malliavin term for one path. With g_m(s) = d_x b_m(s) sigma e^{A(s)}
// the quadruple integral is iint g_i(s) g_j(t) M(t, s) M(s, t) ds dt, where
// M(t, s) = int_0^s phi(t, v) e^{-A(v)} dv.
Eigen::MatrixXd quadruple_term(const std::vector<std::vector<double>>& g_cells,
                               std::span<const double> e_cells, const KernelWeights& weights) {
  const std::size_t n = weights.n_cells();
  const double dt = weights.grid().dt();
  const auto lag = weights.lag_masses();
  std::vector<double> m(n * n);  // m[ct * n + cs] = M(t, s)
  for (std::size_t ct = 0; ct < n; ++ct) {
    double running = 0.0;
    for (std::size_t cs = 0; cs < n; ++cs) {
      const double w = lag[ct > cs ? ct - cs : cs - ct] * e_cells[cs];
      m[ct * n + cs] = (running + 0.5 * w) / dt;
      running += w;
    }
  }
  const std::size_t p = g_cells.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  std::vector<double> h(n);
  for (std::size_t j = 0; j < p; ++j) {
    // h_j(s) = sum_t g_j(t) M(t, s) M(s, t)
    for (std::size_t cs = 0; cs < n; ++cs) {
      double acc = 0.0;
      for (std::size_t ct = 0; ct < n; ++ct) acc += g_cells[j][ct] * m[ct * n + cs] * m[cs * n + ct];
      h[cs] = acc;
    }
    for (std::size_t i = 0; i < p; ++i) {
      double acc = 0.0;
      for (std::size_t cs = 0; cs < n; ++cs) acc += g_cells[i][cs] * h[cs];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc * dt * dt;
    }
  }
  return out;
}

double mean_of(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

double covariance_of_means(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += (x[k] - mx) * (y[k] - my);
  return acc / static_cast<double>(n - 1) / static_cast<double>(n);
}

}  // namespace

nlohmann::json VarianceEstimate::to_json() const {
  auto matrix = [](const Eigen::MatrixXd& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["n_mc"] = n_mc;
  j["Psi"] = matrix(psi);
  j["Psi_se"] = matrix(psi_se);
  j["Sigma2"] = matrix(sigma2);
  j["Sigma2_se"] = matrix(sigma2_se);
  j["SigmaTilde2"] = matrix(sigma_tilde2);
  if (sigma_tilde2_se) j["SigmaTilde2_se"] = *sigma_tilde2_se;
  if (v_tilde) j["V_tilde"] = *v_tilde;
  if (v_tilde_se) j["V_tilde_se"] = *v_tilde_se;
  if (sigma_bar2) j["SigmaBar2"] = *sigma_bar2;
  if (sigma_bar2_se) j["SigmaBar2_se"] = *sigma_bar2_se;
  return j;
}

VarianceEstimate asymptotic_variance_mc(const DriftModel& model, std::span<const double> theta0,
                                        double sigma, HurstParameter h, const TimeGrid& grid,
                                        const VarianceSettings& settings) {
  if (!(h.value() > 0.5)) throw ConfigError("asymptotic variance needs H > 1/2");
  if (theta0.size() != model.p()) throw ConfigError("theta length does not match model");
  if (settings.n_mc < 2) throw ConfigError("asymptotic variance needs n_mc >= 2");
  const std::size_t p = model.p();
  const std::size_t n_ref = settings.n_ref > 0 ? settings.n_ref : std::max<std::size_t>(settings.n_mc, 1000);

  auto noise = std::make_shared<const FbmEnsemble>(
      FbmSampler(h, grid).sample(settings.n_mc, settings.seed, 0, StreamPurpose::kNoise));
  const auto initial = settings.initial.draw(settings.n_mc, settings.seed, 0);
  const LimitProxy proxy = simulate_limit_proxy(model, theta0, sigma, initial, noise, n_ref,
                                                settings.initial, settings.seed, 0);
  const ParticleEnsemble& paths = proxy.tracked;
  const KernelWeights weights = build_kernel_weights(h, grid);
  const DriftTable table = DriftTable::evaluate(paths);
  const auto cumulative = exponential_surrogate(paths, theta0).cumulative();
  const double unit_theta = 1.0;
  const std::optional<PathMatrix> unit_cumulative =
      p == 1 ? std::optional(exponential_surrogate(paths, std::span<const double>(&unit_theta, 1)).cumulative())
             : std::nullopt;

  const std::size_t n = grid.n_steps();
  const std::size_t nodes = grid.n_nodes();
  const double dt = grid.dt();
  std::vector<PathTerms> terms(settings.n_mc);
  parallel_for(settings.n_mc, settings.threads, [&](std::size_t i) {
    PathTerms& out = terms[i];
    out.psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    out.sigma2 = out.psi;
    const auto a = cumulative.row(i);
    const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    const double centre = 0.5 * (*lo + *hi);

    std::vector<double> e_nodes(nodes), e_cells(n), tmp(nodes);
    for (std::size_t t = 0; t < nodes; ++t) e_nodes[t] = std::exp(-(a[t] - centre));
    edge_averages(e_nodes, e_cells);
    std::vector<std::vector<double>> g_cells(p, std::vector<double>(n));
    for (std::size_t m = 0; m < p; ++m) {
      const auto dxb = table.dxb[m].row(i);
      for (std::size_t t = 0; t < nodes; ++t) tmp[t] = dxb[t] * sigma * std::exp(a[t] - centre);
      edge_averages(tmp, g_cells[m]);
    }
    for (std::size_t l = 0; l < p; ++l) {
      const auto bl = table.b[l].row(i);
      for (std::size_t m = l; m < p; ++m) {
        const auto bm = table.b[m].row(i);
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) acc += 0.5 * (bl[t] * bm[t] + bl[t + 1] * bm[t + 1]);
        const auto li = static_cast<Eigen::Index>(l), mi = static_cast<Eigen::Index>(m);
        out.psi(li, mi) = out.psi(mi, li) = acc * dt;
        out.sigma2(li, mi) = out.sigma2(mi, li) = double_integral_separable(bl, bm, weights, Region::kFull);
      }
    }
    out.sigma2 += quadruple_term(g_cells, e_cells, weights);
    out.sigma2 *= sigma * sigma;

    if (unit_cumulative) {
      const auto u = unit_cumulative->row(i);
      const auto dxb = table.dxb[0].row(i);
      const double th = theta0[0];
      const auto [ulo, uhi] = std::minmax_element(u.begin(), u.end());
      const double uc = 0.5 * (*ulo + *uhi);
      std::vector<double> u1(nodes), v1(nodes), u2(nodes), v2(nodes);
      for (std::size_t t = 0; t < nodes; ++t) {
        const double up = std::exp(th * (u[t] - uc));
        const double down = std::exp(-th * (u[t] - uc));
        u1[t] = dxb[t] * (u[t] - uc) * up;
        v1[t] = down;
        u2[t] = dxb[t] * up;
        v2[t] = (u[t] - uc) * down;
      }
      out.v_tilde = sigma * (double_integral_separable(u1, v1, weights, Region::kLowerTriangle) -
                             double_integral_separable(u2, v2, weights, Region::kLowerTriangle));
    }
  });

  VarianceEstimate est;
  est.n_mc = settings.n_mc;
  const auto pi = static_cast<Eigen::Index>(p);
  est.psi = Eigen::MatrixXd::Zero(pi, pi);
  est.psi_se = est.psi;
  est.sigma2 = est.psi;
  est.sigma2_se = est.psi;
  std::vector<double> xs(settings.n_mc), ys(settings.n_mc);
  for (Eigen::Index l = 0; l < pi; ++l) {
    for (Eigen::Index m = 0; m < pi; ++m) {
      for (std::size_t k = 0; k < settings.n_mc; ++k) {
        xs[k] = terms[k].psi(l, m);
        ys[k] = terms[k].sigma2(l, m);
      }
      est.psi(l, m) = mean_of(xs);
      est.psi_se(l, m) = std::sqrt(covariance_of_means(xs, xs));
      est.sigma2(l, m) = mean_of(ys);
      est.sigma2_se(l, m) = std::sqrt(covariance_of_means(ys, ys));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.psi, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw NumericalError("estimated Psi is not positive definite; the drift components are not identifiable");
  }
  const Eigen::MatrixXd psi_inv = est.psi.inverse();
  est.sigma_tilde2 = psi_inv * est.sigma2 * psi_inv;

  if (p == 1) {
    std::vector<double> ps(settings.n_mc), ss(settings.n_mc), vs(settings.n_mc);
    for (std::size_t k = 0; k < settings.n_mc; ++k) {
      ps[k] = terms[k].psi(0, 0);
      ss[k] = terms[k].sigma2(0, 0);
      vs[k] = terms[k].v_tilde;
    }
    const double psi = est.psi(0, 0), s2 = est.sigma2(0, 0), v = mean_of(vs);
    est.v_tilde = v;
    est.v_tilde_se = std::sqrt(covariance_of_means(vs, vs));
    const std::vector<const std::vector<double>*> cols{&ps, &ss, &vs};
    Eigen::Matrix3d cov;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cov(r, c) = covariance_of_means(*cols[r], *cols[c]);
    }
    Eigen::Vector3d g_tilde(-2.0 * s2 / (psi * psi * psi), 1.0 / (psi * psi), 0.0);
    est.sigma_tilde2_se = std::sqrt(std::max(0.0, g_tilde.dot(cov * g_tilde)));
    const double d = psi - v;
    est.sigma_bar2 = s2 / (d * d);
    Eigen::Vector3d g_bar(-2.0 * s2 / (d * d * d), 1.0 / (d * d), 2.0 * s2 / (d * d * d));
    est.sigma_bar2_se = std::sqrt(std::max(0.0, g_bar.dot(cov * g_bar)));
  }
  return est;
}

}  // namespace fbmips
