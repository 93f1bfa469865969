#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fbmips/error.hpp"
#include "fbmips/mc_harness.hpp"

using namespace fbmips;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model = "arctan";
  c.theta0 = {3.0};
  c.h_list = {0.6, 0.8};
  c.n_list = {4, 6};
  c.n_steps = 40;
  c.estimators = {"ratio", "fixed_point", "iterative", "contrast"};
  c.mc_reps = 6;
  c.master_seed = 99;
  c.settings.contrast_grid = ContrastGrid{{0.0}, {6.0}, {0.5}};
  c.contrast_grid_set = true;
  return c;
}

std::string csv(const std::vector<ResultRow>& rows, bool timing = false) {
  std::ostringstream out;
  emit_results(rows, out, EmitOptions{OutputFormat::kCsv, timing});
  return out.str();
}

}  // namespace

TEST(RunExperiment, SingleReplicationRmseIsAbsoluteBias) {
  ExperimentConfig c = small_config();
  c.mc_reps = 1;
  for (const auto& r : run_experiment(c)) {
    EXPECT_EQ(r.rmse, std::abs(r.bias)) << r.estimator;
    EXPECT_EQ(r.reps, 1u);
  }
}

TEST(RunExperiment, RowsSortedAndComplete) {
  const auto rows = run_experiment(small_config());
  ASSERT_EQ(rows.size(), 4u * 2u * 2u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& a = rows[k - 1];
    const auto& b = rows[k];
    EXPECT_TRUE(std::tie(a.estimator, a.h, a.n_particles) < std::tie(b.estimator, b.h, b.n_particles));
  }
  for (const auto& r : rows) {
    EXPECT_GE(r.rmse * r.rmse, r.bias * r.bias * (1.0 - 1e-12));
    EXPECT_TRUE(r.valid);
    EXPECT_EQ(r.failures, 0u);
  }
}

TEST(RunExperiment, TwoParameterGivesRowPerCoordinate) {
  ExperimentConfig c;
  c.model = "two_param";
  c.theta0 = {2.0, 11.0};
  c.h_list = {0.7};
  c.n_list = {5};
  c.n_steps = 40;
  c.estimators = {"ratio", "contrast"};
  c.mc_reps = 3;
  c.settings.contrast_grid = ContrastGrid{{0.0, 8.0}, {5.0, 14.0}, {0.5, 0.5}};
  c.contrast_grid_set = true;
  const auto rows = run_experiment(c);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].theta_index, 0u);
  EXPECT_EQ(rows[1].theta_index, 1u);
}

TEST(RunExperiment, ThreadCountInvariance) {
  ExperimentConfig c = small_config();
  const std::string one = csv(run_experiment(c));
  c.threads = 3;
  EXPECT_EQ(csv(run_experiment(c)), one);
}

TEST(RunExperiment, ReplicationOrderIndependence) {
  const ExperimentConfig c = small_config();
  const auto rows = run_experiment(c);
  for (const std::string est : {"ratio", "fixed_point"}) {
    std::vector<double> errors(c.mc_reps);
    for (std::size_t rep = c.mc_reps; rep-- > 0;) errors[rep] = replication_errors(c, est, 0.8, 6, rep)[0];
    double s1 = 0.0, s2 = 0.0;
    for (double e : errors) {
      s1 += e;
      s2 += e * e;
    }
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const ResultRow& r) {
      return r.estimator == est && r.h == 0.8 && r.n_particles == 6;
    });
    ASSERT_NE(it, rows.end());
    EXPECT_EQ(it->bias, s1 / 6.0);
    EXPECT_EQ(it->rmse, std::sqrt(s2 / 6.0));
  }
}

TEST(RunExperiment, SeedChangesResults) {
  ExperimentConfig c = small_config();
  const auto a = run_experiment(c);
  c.master_seed = 100;
  EXPECT_NE(csv(run_experiment(c)), csv(a));
}

TEST(RunExperiment, ValidationErrors) {
  auto expect_config_error = [](const ExperimentConfig& c, const std::string& fragment) {
    try {
      c.validate();
      FAIL() << "expected ConfigError containing " << fragment;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  ExperimentConfig c = small_config();
  c.mc_reps = 0;
  expect_config_error(c, "mc_reps");
  c = small_config();
  c.estimators = {"bogus"};
  expect_config_error(c, "bogus");
  c = small_config();
  c.model = "two_param";
  c.theta0 = {2.0, 11.0};
  c.estimators = {"fixed_point"};
  expect_config_error(c, "p = 1");
  c = small_config();
  c.contrast_grid_set = false;
  expect_config_error(c, "grid");
  c = small_config();
  c.theta0 = {1.0, 2.0};
  expect_config_error(c, "theta0");
  c = small_config();
  c.h_list = {0.3};
  expect_config_error(c, "H >= 1/2");
}

TEST(EmitResults, EmptyRowsAreAnError) {
  std::ostringstream out;
  EXPECT_THROW(emit_results({}, out), ConfigError);
}

TEST(EmitResults, HeaderAndDeterminism) {
  const auto rows = run_experiment(small_config());
  const std::string a = csv(rows), b = csv(rows);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "estimator,model,theta_index,H,N,rmse,bias,stderr_rmse,stderr_bias,reps,failures,wall_time_s");
  for (const auto& r : rows) EXPECT_GT(r.wall_time_s, 0.0);
  std::istringstream in(a);
  for (const auto& r : parse_results_csv(in)) EXPECT_EQ(r.wall_time_s, 0.0);
}

TEST(EmitResults, CsvRoundTrip) {
  const auto rows = run_experiment(small_config());
  std::istringstream in(csv(rows, true));
  EXPECT_EQ(parse_results_csv(in), rows);
}

TEST(EmitResults, Json) {
  const auto rows = run_experiment(small_config());
  std::ostringstream out;
  emit_results(rows, out, EmitOptions{OutputFormat::kJson, false});
  const auto j = nlohmann::json::parse(out.str());
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), rows.size());
  EXPECT_EQ(j[0]["estimator"], rows[0].estimator);
  EXPECT_EQ(j[0]["rmse"].get<double>(), rows[0].rmse);
}

TEST(EmitResults, UnwritablePath) {
  const auto rows = run_experiment(small_config());
  EXPECT_ANY_THROW(emit_results(rows, std::filesystem::path("/nonexistent-dir/x.csv")));
}

TEST(PrintSummary, RmseBiasCells) {
  ExperimentConfig c = small_config();
  c.estimators = {"ratio"};
  const auto rows = run_experiment(c);
  std::ostringstream out;
  print_summary(rows, out);
  const std::string text = out.str();
  char cell[64];
  std::snprintf(cell, sizeof cell, "%.3g (%.3g)", rows[0].rmse, rows[0].bias);
  EXPECT_NE(text.find(cell), std::string::npos) << text;
  EXPECT_NE(text.find("ratio"), std::string::npos);
}
