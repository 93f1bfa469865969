#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fbmips/error.hpp"
#include "fbmips/malliavin.hpp"
#include "support.hpp"

using namespace fbmips;
using fbmips::testing::simulate;

namespace {

// b(x) = c0 x: constant slope and no measure dependence.
DriftModel constant_slope_model(double c0) {
  DriftMetadata meta;
  meta.dmub_constant_in_v = true;
  return DriftModel(
      "constant_slope", 1, [c0](std::size_t, double x, const MeasureSummary&) { return c0 * x; },
      [c0](std::size_t, double, const MeasureSummary&) { return c0; },
      [](std::size_t, double, const MeasureSummary&, double) { return 0.0; }, meta);
}

DriftModel zero_slope_model() {
  return DriftModel(
      "constant", 1, [](std::size_t, double, const MeasureSummary&) { return 1.0; },
      [](std::size_t, double, const MeasureSummary&) { return 0.0; },
      [](std::size_t, double, const MeasureSummary&, double) { return 0.0; });
}

std::shared_ptr<const ParticleEnsemble> simulate_model(const DriftModel& model, double theta, double sigma,
                                                       const TimeGrid& g, std::size_t n, std::uint64_t seed) {
  auto noise = std::make_shared<const FbmEnsemble>(sample_fbm(HurstParameter(0.7), g, n, seed));
  const auto x0 = InitialCondition::standard_normal().draw(n, seed, 0);
  const std::vector<double> th{theta};
  return std::make_shared<const ParticleEnsemble>(euler_simulate(model, th, sigma, x0, noise));
}

}  // namespace

TEST(MalliavinInteracting, DecoupledConstantSlopeIsGeometric) {
  const TimeGrid g(1.0, 50);
  const double c0 = -0.8, theta = 1.5, sigma = 0.7;
  const auto ens = simulate_model(constant_slope_model(c0), theta, sigma, g, 4, 3);
  const std::vector<double> th{theta};
  const auto panel = malliavin_interacting(*ens, th, 10, {{0, 0}, {1, 0}, {2, 3}});
  const double factor = 1.0 + g.dt() * theta * c0;
  for (std::size_t t = 0; t <= 50; ++t) {
    const double expected = t < 10 ? 0.0 : sigma * std::pow(factor, static_cast<double>(t - 10));
    EXPECT_NEAR(panel.at(0, 0)[t], expected, 1e-13);
    EXPECT_EQ(panel.at(1, 0)[t], 0.0);
    EXPECT_EQ(panel.at(2, 3)[t], 0.0);
  }
}

TEST(MalliavinInteracting, AdaptedAndStartsAtSigma) {
  const auto ens = simulate("arctan", {3.0}, 0.9, 0.7, TimeGrid(1.0, 40), 6, 2);
  DerivativeSolver solver(*ens, std::vector<double>{3.0});
  for (std::size_t s : {0u, 17u, 40u}) {
    const PathMatrix& col = solver.malliavin_column(s, 2);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t t = 0; t < s; ++t) EXPECT_EQ(col(i, t), 0.0);
      EXPECT_DOUBLE_EQ(col(i, s), i == 2 ? 0.9 : 0.0);
    }
  }
  EXPECT_THROW(solver.malliavin_column(41, 0), ConfigError);
}

TEST(MalliavinInteracting, FastMeasurePathMatchesGeneric) {
  // Same linear drift, once declared mean-field and once not.
  const DriftModel fast = model_linear_meanfield();
  const DriftModel slow("linear_generic", 1, [](std::size_t, double x, const MeasureSummary& mu) { return x - mu.mean; },
                        [](std::size_t, double, const MeasureSummary&) { return 1.0; },
                        [](std::size_t, double, const MeasureSummary&, double) { return -1.0; });
  const TimeGrid g(1.0, 30);
  const auto a = simulate_model(fast, 2.0, 1.0, g, 5, 4);
  const auto b = simulate_model(slow, 2.0, 1.0, g, 5, 4);
  DerivativeSolver sa(*a, std::vector<double>{2.0});
  DerivativeSolver sb(*b, std::vector<double>{2.0});
  const auto& ca = sa.malliavin_column(5, 1);
  const auto& cb = sb.malliavin_column(5, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t t = 0; t <= 30; ++t) EXPECT_NEAR(ca(i, t), cb(i, t), 1e-12);
  }
}

TEST(MalliavinInteracting, OffDiagonalScalesLikeOneOverN) {
  auto max_offdiag = [](std::size_t n) {
    const auto ens = simulate("linear", {2.0}, 1.0, 0.7, TimeGrid(1.0, 50), n, 7);
    DerivativeSolver solver(*ens, std::vector<double>{2.0});
    double m = 0.0;
    for (std::size_t s : {0u, 25u}) {
      const auto& col = solver.malliavin_column(s, 0);
      for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t t = 0; t <= 50; ++t) m = std::max(m, std::abs(col(i, t)));
      }
    }
    return m;
  };
  const double m20 = max_offdiag(20), m40 = max_offdiag(40), m80 = max_offdiag(80);
  EXPECT_NEAR(m40 / m20, 0.5, 0.05);
  EXPECT_NEAR(m80 / m40, 0.5, 0.05);
}

TEST(MalliavinInteracting, DiagonalBoundUniformInN) {
  auto max_diag = [](std::size_t n) {
    const auto ens = simulate("arctan", {5.0}, 1.0, 0.7, TimeGrid(1.0, 100), n, 8);
    DerivativeSolver solver(*ens, std::vector<double>{5.0});
    double m = 0.0;
    for (std::size_t j = 0; j < n; j += n / 5) {
      const auto& col = solver.malliavin_column(0, j);
      for (std::size_t t = 0; t <= 100; ++t) m = std::max(m, std::abs(col(j, t)));
    }
    return m;
  };
  const double c10 = max_diag(10);
  EXPECT_LE(max_diag(80), 1.05 * c10);
}

TEST(MalliavinInteracting, IncrementsAreLipschitzInTime) {
  for (std::size_t n : {10u, 40u}) {
    const auto ens = simulate("linear", {2.0}, 1.0, 0.7, TimeGrid(1.0, 100), n, 9);
    DerivativeSolver solver(*ens, std::vector<double>{2.0});
    const auto& col = solver.malliavin_column(20, 0);
    const double dt = 0.01;
    double diag = 0.0, off = 0.0;
    for (std::size_t t = 20; t < 100; ++t) {
      diag = std::max(diag, std::abs(col(0, t + 1) - col(0, t)) / dt);
      for (std::size_t i = 1; i < n; ++i) off = std::max(off, std::abs(col(i, t + 1) - col(i, t)) / dt);
    }
    // Linear model, theta = 2: |D| <= e^2, so slopes stay below 2 e^2.
    EXPECT_LE(diag, 2.0 * std::exp(2.0));
    EXPECT_LE(off * static_cast<double>(n), 2.0 * std::exp(2.0));
  }
}

TEST(ExponentialSurrogate, ClosedForms) {
  const TimeGrid g(1.0, 40);
  const auto flat = simulate_model(zero_slope_model(), 3.0, 0.6, g, 3, 1);
  const auto z0 = exponential_surrogate(*flat, std::vector<double>{3.0});
  EXPECT_DOUBLE_EQ(z0.value(1, 4, 30), 0.6);

  const auto decay = simulate_model(constant_slope_model(-1.0), 1.0, 0.6, g, 3, 1);
  const auto z1 = malliavin_independent(*decay, std::vector<double>{1.0});
  EXPECT_NEAR(z1.value(2, 10, 30), 0.6 * std::exp(-(g.node(30) - g.node(10))), 1e-14);
  EXPECT_DOUBLE_EQ(z1.value(2, 12, 12), 0.6);
  EXPECT_EQ(z1.value(2, 13, 12), 0.0);
}

TEST(ExponentialSurrogate, ThetaZeroAndConcatenation) {
  const auto ens = simulate("arctan", {4.0}, 1.3, 0.7, TimeGrid(1.0, 60), 5, 5);
  const auto zero = exponential_surrogate(*ens, std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(zero.value(0, 3, 50), 1.3);
  const auto z = exponential_surrogate(*ens, std::vector<double>{4.0});
  for (std::size_t i = 0; i < 5; ++i) {
    const double direct = z.value(i, 5, 55);
    const double joined = z.value(i, 5, 30) * z.value(i, 30, 55) / 1.3;
    EXPECT_NEAR(joined / direct, 1.0, 1e-12);
  }
}

TEST(InitialConditionDerivative, DecoupledConstantSlope) {
  const TimeGrid g(1.0, 50);
  const auto ens = simulate_model(constant_slope_model(0.5), 2.0, 1.0, g, 3, 6);
  const auto d = initial_condition_derivative(*ens, std::vector<double>{2.0}, 1);
  const double factor = 1.0 + g.dt() * 2.0 * 0.5;
  for (std::size_t t = 0; t <= 50; ++t) {
    EXPECT_NEAR(d(1, t), std::pow(factor, static_cast<double>(t)), 1e-12);
    EXPECT_EQ(d(0, t), 0.0);
    EXPECT_EQ(d(2, t), 0.0);
  }
}

TEST(InitialConditionDerivative, StartsAtIndicator) {
  const auto ens = simulate("arctan", {2.0}, 1.0, 0.7, TimeGrid(1.0, 20), 4, 6);
  const auto d = initial_condition_derivative(*ens, std::vector<double>{2.0}, 3);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d(i, 0), i == 3 ? 1.0 : 0.0);
}

TEST(InitialConditionDerivative, MatchesFiniteDifferenceOfShiftedFamily) {
  const auto ens = simulate("arctan", {3.0}, 1.0, 0.7, TimeGrid(1.0, 100), 8, 2);
  const std::vector<double> th{3.0};
  auto gap = [&](double eps) {
    const auto fam = simulate_shifted_family(ens, eps);
    double m = 0.0;
    for (std::size_t j = 0; j < 8; j += 3) {
      const auto d = initial_condition_derivative(*ens, th, j);
      for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t t = 0; t <= 100; ++t) {
          const double fd = (fam.shifted_states[j](i, t) - ens->states(i, t)) / eps;
          m = std::max(m, std::abs(fd - d(i, t)));
        }
      }
    }
    return m;
  };
  const double g1 = gap(1e-2), g2 = gap(5e-3);
  EXPECT_LT(g1, 0.05);
  EXPECT_NEAR(g2 / g1, 0.5, 0.1);
}

TEST(PocRateReport, ThetaZeroGivesZeroGaps) {
  PocSettings s;
  s.n_list = {4, 8, 16};
  s.reps = 3;
  const auto rows = poc_rate_report(model_linear_meanfield(), std::vector<double>{0.0}, 1.0, HurstParameter(0.7),
                                    TimeGrid(1.0, 20), InitialCondition::standard_normal(), s);
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& r : rows) EXPECT_EQ(r.estimate, 0.0) << r.quantity << " N=" << r.n_particles;
}

TEST(PocRateReport, RejectsShortNList) {
  PocSettings s;
  s.n_list = {4, 8};
  EXPECT_THROW(poc_rate_report(model_linear_meanfield(), std::vector<double>{1.0}, 1.0, HurstParameter(0.7),
                               TimeGrid(1.0, 20), InitialCondition::standard_normal(), s),
               ConfigError);
}

TEST(PocRateReport, CsvLayout) {
  PocSettings s;
  s.n_list = {4, 8, 16};
  s.reps = 4;
  const auto rows = poc_rate_report(model_linear_meanfield(), std::vector<double>{1.0}, 1.0, HurstParameter(0.7),
                                    TimeGrid(1.0, 20), InitialCondition::standard_normal(), s);
  std::ostringstream out;
  write_poc_csv(rows, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "quantity,N,estimate,stderr,slope,slope_stderr");
}

TEST(LoglogSlope, ExactPowerLaw) {
  const std::vector<double> x{10, 20, 40, 80};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 / v);
  const auto [slope, se] = loglog_slope(x, y);
  EXPECT_NEAR(slope, -1.0, 1e-12);
  EXPECT_NEAR(se, 0.0, 1e-10);
}
