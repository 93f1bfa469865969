#include "fbmips/drift_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fbmips/error.hpp"

namespace fbmips {

MeasureSummary MeasureSummary::from_positions(std::span<const double> positions) {
  MeasureSummary mu;
  mu.sample.assign(positions.begin(), positions.end());
  std::sort(mu.sample.begin(), mu.sample.end());
  double s1 = 0.0, s2 = 0.0;
  for (double x : positions) {
    s1 += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(positions.size());
  mu.mean = s1 / n;
  mu.second_moment = s2 / n;
  return mu;
}

DriftModel::DriftModel(std::string key, std::size_t p, Component b, Component dxb,
                       MeasureDerivative dmub, DriftMetadata metadata)
    : key_(std::move(key)),
      p_(p),
      b_(std::move(b)),
      dxb_(std::move(dxb)),
      dmub_(std::move(dmub)),
      metadata_(metadata) {
  if (p_ == 0) throw ConfigError("drift model must have at least one component");
  if (!b_ || !dxb_ || !dmub_) throw ConfigError("drift model '" + key_ + "' has an empty callback");
}

double DriftModel::drift(std::span<const double> theta, double x, const MeasureSummary& mu) const {
  double acc = 0.0;
  for (std::size_t m = 0; m < p_; ++m) acc += theta[m] * b_(m, x, mu);
  return acc;
}

double DriftModel::drift_dx(std::span<const double> theta, double x, const MeasureSummary& mu) const {
  double acc = 0.0;
  for (std::size_t m = 0; m < p_; ++m) acc += theta[m] * dxb_(m, x, mu);
  return acc;
}

double DriftModel::drift_dmu(std::span<const double> theta, double x, const MeasureSummary& mu,
                             double v) const {
  double acc = 0.0;
  for (std::size_t m = 0; m < p_; ++m) acc += theta[m] * dmub_(m, x, mu, v);
  return acc;
}

DriftModel model_linear_meanfield() {
  DriftMetadata meta;
  meta.lipschitz = 2.0;
  meta.dmub_constant_in_v = true;
  meta.dxb_sup = 1.0;
  meta.deriv_lower = 1.0;
  return DriftModel(
      "linear", 1, [](std::size_t, double x, const MeasureSummary& mu) { return x - mu.mean; },
      [](std::size_t, double, const MeasureSummary&) { return 1.0; },
      [](std::size_t, double, const MeasureSummary&, double) { return -1.0; }, meta);
}

DriftModel model_arctan() {
  DriftMetadata meta;
  meta.lipschitz = 2.0;
  meta.dmub_constant_in_v = true;
  meta.dxb_sup = 1.0;
  meta.drift_lower = 2.0 - std::numbers::pi / 2.0;
  meta.dxb_nonpositive = true;
  return DriftModel(
      "arctan", 1,
      [](std::size_t, double x, const MeasureSummary& mu) { return 2.0 - std::atan(x - mu.mean); },
      [](std::size_t, double x, const MeasureSummary& mu) {
        const double d = x - mu.mean;
        return -1.0 / (1.0 + d * d);
      },
      [](std::size_t, double x, const MeasureSummary& mu, double) {
        const double d = x - mu.mean;
        return 1.0 / (1.0 + d * d);
      },
      meta);
}

DriftModel model_two_param() {
  DriftMetadata meta;
  meta.lipschitz = 2.0;
  meta.dmub_constant_in_v = true;
  meta.dxb_sup = 1.0;
  meta.deriv_lower = 1.0;
  return DriftModel(
      "two_param", 2,
      [](std::size_t m, double x, const MeasureSummary& mu) { return m == 0 ? x - mu.mean : x; },
      [](std::size_t, double, const MeasureSummary&) { return 1.0; },
      [](std::size_t m, double, const MeasureSummary&, double) { return m == 0 ? -1.0 : 0.0; }, meta);
}

DriftModel model_by_key(const std::string& key) {
  if (key == "linear") return model_linear_meanfield();
  if (key == "arctan") return model_arctan();
  if (key == "two_param") return model_two_param();
  throw ConfigError("unknown model '" + key + "' (expected linear, arctan or two_param)");
}

std::vector<std::string> builtin_model_keys() { return {"linear", "arctan", "two_param"}; }

}  // namespace fbmips
