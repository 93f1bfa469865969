#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fbmips {

/// Summary of an empirical measure mu^N = (1/N) sum_i delta_{x_i}.
struct MeasureSummary {
  std::vector<double> sample;  // sorted ascending
  double mean = 0.0;
  double second_moment = 0.0;

  static MeasureSummary from_positions(std::span<const double> positions);
  std::size_t size() const { return sample.size(); }
};

/// Optional regularity bounds. Estimator preflight checks degrade to
/// warnings when a needed entry is absent.
struct DriftMetadata {
  std::optional<double> lipschitz;        // Lipschitz constant in (x, mu)
  std::optional<double> dxb_sup;          // sup |d_x b|
  std::optional<double> deriv_lower;      // M with |d_x b_m| >= M
  std::optional<double> drift_lower;      // l with |b| >= l
  std::optional<bool> dxb_nonpositive;    // d_x b <= 0 everywhere
  /// d_mu b(x, mu)(v) does not depend on v (mean-field through the mean only);
  /// lets derivative solvers sum the measure term in O(N).
  bool dmub_constant_in_v = false;
};

/// Drift b(x, mu) = (b_1, ..., b_p) entering sum_m theta_m b_m(x, mu).
/// Callbacks must be pure; the model is an immutable value.
class DriftModel {
 public:
  using Component = std::function<double(std::size_t m, double x, const MeasureSummary& mu)>;
  using MeasureDerivative =
      std::function<double(std::size_t m, double x, const MeasureSummary& mu, double v)>;

  DriftModel(std::string key, std::size_t p, Component b, Component dxb, MeasureDerivative dmub,
             DriftMetadata metadata = {});

  const std::string& key() const { return key_; }
  std::size_t p() const { return p_; }
  const DriftMetadata& metadata() const { return metadata_; }

  double b(std::size_t m, double x, const MeasureSummary& mu) const { return b_(m, x, mu); }
  double dxb(std::size_t m, double x, const MeasureSummary& mu) const { return dxb_(m, x, mu); }
  /// Lions derivative d_mu b_m(x, mu)(v).
  double dmub(std::size_t m, double x, const MeasureSummary& mu, double v) const {
    return dmub_(m, x, mu, v);
  }

  /// <theta, b(x, mu)>
  double drift(std::span<const double> theta, double x, const MeasureSummary& mu) const;
  /// <theta, d_x b(x, mu)>
  double drift_dx(std::span<const double> theta, double x, const MeasureSummary& mu) const;
  /// <theta, d_mu b(x, mu)(v)>
  double drift_dmu(std::span<const double> theta, double x, const MeasureSummary& mu, double v) const;

 private:
  std::string key_;
  std::size_t p_;
  Component b_;
  Component dxb_;
  MeasureDerivative dmub_;
  DriftMetadata metadata_;
};

/// b(x, mu) = x - mean(mu).
DriftModel model_linear_meanfield();
/// b(x, mu) = 2 - arctan(x - mean(mu)).
DriftModel model_arctan();
/// b_1 = x - mean(mu), b_2 = x.
DriftModel model_two_param();

/// Built-in model by config key: `linear`, `arctan`, `two_param`.
DriftModel model_by_key(const std::string& key);

std::vector<std::string> builtin_model_keys();

}  // namespace fbmips
