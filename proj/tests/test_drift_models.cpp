#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fbmips/drift_models.hpp"
#include "fbmips/error.hpp"

using namespace fbmips;

namespace {

MeasureSummary measure_with_mean(double mean) {
  const std::vector<double> xs{mean - 1.0, mean, mean + 1.0};
  return MeasureSummary::from_positions(xs);
}

}  // namespace

TEST(MeasureSummary, SortedWithMoments) {
  const std::vector<double> xs{3.0, -1.0, 2.0};
  const auto mu = MeasureSummary::from_positions(xs);
  EXPECT_EQ(mu.sample, (std::vector<double>{-1.0, 2.0, 3.0}));
  EXPECT_DOUBLE_EQ(mu.mean, 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(mu.second_moment, 14.0 / 3.0);
}

TEST(LinearModel, Values) {
  const auto m = model_linear_meanfield();
  const auto mu = measure_with_mean(0.5);
  EXPECT_EQ(m.p(), 1u);
  EXPECT_DOUBLE_EQ(m.b(0, 2.0, mu), 1.5);
  EXPECT_EQ(m.dxb(0, -7.0, mu), 1.0);
  EXPECT_EQ(m.dmub(0, 3.0, mu, 9.0), -1.0);
}

TEST(ArctanModel, ValuesAndMetadata) {
  const auto m = model_arctan();
  const auto mu = measure_with_mean(0.3);
  EXPECT_DOUBLE_EQ(m.b(0, 0.3, mu), 2.0);
  EXPECT_DOUBLE_EQ(m.dxb(0, 0.3, mu), -1.0);
  EXPECT_DOUBLE_EQ(m.dmub(0, 1.3, mu, 5.0), 0.5);
  EXPECT_NEAR(*m.metadata().drift_lower, 2.0 - std::numbers::pi / 2.0, 1e-15);
  EXPECT_EQ(m.metadata().dxb_nonpositive, true);
  EXPECT_EQ(*m.metadata().dxb_sup, 1.0);
}

TEST(TwoParamModel, Values) {
  const auto m = model_two_param();
  const auto mu = measure_with_mean(1.0);
  EXPECT_EQ(m.p(), 2u);
  EXPECT_EQ(m.b(0, 1.0, mu), 0.0);
  EXPECT_EQ(m.b(1, 1.0, mu), 1.0);
  EXPECT_EQ(m.dxb(0, 4.0, mu), 1.0);
  EXPECT_EQ(m.dxb(1, 4.0, mu), 1.0);
  EXPECT_EQ(m.dmub(0, 4.0, mu, 2.0), -1.0);
  EXPECT_EQ(m.dmub(1, 4.0, mu, 2.0), 0.0);
  const std::vector<double> theta{2.0, 11.0};
  EXPECT_DOUBLE_EQ(m.drift(theta, 3.0, mu), 2.0 * 2.0 + 11.0 * 3.0);
  EXPECT_DOUBLE_EQ(m.drift_dx(theta, 3.0, mu), 13.0);
}

TEST(ModelRegistry, LookupAndUnknownKey) {
  for (const auto& key : builtin_model_keys()) EXPECT_EQ(model_by_key(key).key(), key);
  EXPECT_THROW(model_by_key("quadratic"), ConfigError);
}

// Metadata bounds hold on sampled states; derivatives agree with central
// differences of b in x and in a shift of the measure.
class ModelProperties : public ::testing::TestWithParam<std::string> {};

TEST_P(ModelProperties, MetadataAndDerivativesOnSamples) {
  const auto m = model_by_key(GetParam());
  const auto& meta = m.metadata();
  const double eps = 1e-6;
  for (int a = -20; a <= 20; ++a) {
    const double x = 0.37 * a;
    for (double mean : {-2.0, 0.0, 1.5}) {
      const auto mu = measure_with_mean(mean);
      for (std::size_t k = 0; k < m.p(); ++k) {
        const double b = m.b(k, x, mu);
        ASSERT_TRUE(std::isfinite(b));
        if (meta.drift_lower) EXPECT_GE(std::abs(b), *meta.drift_lower - 1e-12);
        if (meta.dxb_sup) EXPECT_LE(std::abs(m.dxb(k, x, mu)), *meta.dxb_sup + 1e-12);
        if (meta.dxb_nonpositive == true) EXPECT_LE(m.dxb(k, x, mu), 0.0);
        if (meta.deriv_lower) EXPECT_GE(std::abs(m.dxb(k, x, mu)), *meta.deriv_lower - 1e-12);
        const double fd = (m.b(k, x + eps, mu) - m.b(k, x - eps, mu)) / (2 * eps);
        EXPECT_NEAR(m.dxb(k, x, mu), fd, 1e-6);
        // Moving every atom by h moves the mean by h; for mean-field drifts
        // d/dh b = int d_mu b(v) dmu(v).
        const auto up = measure_with_mean(mean + eps), down = measure_with_mean(mean - eps);
        const double fd_mu = (m.b(k, x, up) - m.b(k, x, down)) / (2 * eps);
        double lions = 0.0;
        for (double v : mu.sample) lions += m.dmub(k, x, mu, v) / static_cast<double>(mu.size());
        EXPECT_NEAR(lions, fd_mu, 1e-6);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Builtins, ModelProperties, ::testing::Values("linear", "arctan", "two_param"));
