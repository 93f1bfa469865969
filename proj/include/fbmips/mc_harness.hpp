#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fbmips/estimators.hpp"
#include "fbmips/ips_sim.hpp"

namespace fbmips {

/// Where the fixed-point and iterative estimators look at the data.
struct HorizonRestriction {
  enum class Kind {
    kNone,   // always the full horizon
    kAuto,   // truncate to T_max when the contraction check fails
    kFixed,  // truncate to `horizon` when the contraction check fails
  };
  Kind kind = Kind::kNone;
  double horizon = 0.0;
};

struct ExperimentConfig {
  std::string model = "linear";
  std::vector<double> theta0{1.0};
  std::vector<double> h_list{0.6};
  std::vector<std::size_t> n_list{30};
  double horizon = 1.0;
  std::size_t n_steps = 1000;
  double sigma = 1.0;
  std::vector<std::string> estimators{"ratio"};
  std::size_t mc_reps = 100;
  std::uint64_t master_seed = 1;
  InitialCondition initial;
  EstimatorSettings settings;
  bool contrast_grid_set = false;
  HorizonRestriction fp_horizon;
  std::size_t threads = 1;

  /// Throws ConfigError naming the first violated precondition.
  void validate() const;
};

struct ResultRow {
  std::string estimator;
  std::string model;
  std::size_t theta_index = 0;
  double h = 0.0;
  std::size_t n_particles = 0;
  double rmse = 0.0;
  double bias = 0.0;
  double stderr_rmse = 0.0;
  double stderr_bias = 0.0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  bool valid = true;
  double wall_time_s = 0.0;

  bool operator==(const ResultRow& other) const = default;
};

/// Called after each finished (H, N) cell with (done, total).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// One simulation per (H, N, replication) shared by all estimators; seeds
/// depend only on those indices. Rows come out sorted by (estimator, H, N,
/// theta_index).
std::vector<ResultRow> run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

/// Errors theta_hat - theta0 of one estimator on one replication's data.
/// Exposed for tests; throws what the estimator throws.
std::vector<double> replication_errors(const ExperimentConfig& config, const std::string& estimator,
                                       double h, std::size_t n_particles, std::size_t rep);

enum class OutputFormat { kCsv, kJson };

struct EmitOptions {
  OutputFormat format = OutputFormat::kCsv;
  /// Wall times vary run to run; when false the column is written as 0 so
  /// that repeated runs give identical bytes.
  bool timing = false;
};

void emit_results(const std::vector<ResultRow>& rows, std::ostream& out, const EmitOptions& options = {});
void emit_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                  const EmitOptions& options = {});

/// Parses the CSV written by emit_results.
std::vector<ResultRow> parse_results_csv(std::istream& in);

/// Text table in "RMSE (Bias)" cells: one line per (estimator, theta
/// index), one column per (H, N).
void print_summary(const std::vector<ResultRow>& rows, std::ostream& out);

}  // namespace fbmips
