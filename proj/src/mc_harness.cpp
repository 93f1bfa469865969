#include "fbmips/mc_harness.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "fbmips/error.hpp"
#include "fbmips/fbm.hpp"
#include "fbmips/parallel.hpp"
#include "fbmips/rng.hpp"

namespace fbmips {

namespace {

const std::vector<std::string>& estimator_keys() {
  static const std::vector<std::string> keys{"ratio", "fixed_point", "iterative", "contrast"};
  return keys;
}

std::uint64_t cell_seed(std::uint64_t master, double h, std::size_t n_particles) {
  return splitmix64(master ^ splitmix64(std::bit_cast<std::uint64_t>(h) ^ splitmix64(n_particles)));
}

ParticleEnsemble simulate_replication(const ExperimentConfig& config, const DriftModel& model,
                                      const FbmSampler& sampler, std::size_t n_particles,
                                      std::size_t rep) {
  const std::uint64_t seed = cell_seed(config.master_seed, sampler.hurst().value(), n_particles);
  auto noise = std::make_shared<const FbmEnsemble>(sampler.sample(n_particles, seed, rep));
  const auto initial = config.initial.draw(n_particles, seed, rep);
  return euler_simulate(model, config.theta0, config.sigma, initial, std::move(noise));
}

// Observations the fixed-point type estimators see.
ParticleEnsemble restricted_for_fixed_point(const ExperimentConfig& config, const ParticleEnsemble& ens,
                                            HurstParameter h) {
  if (config.fp_horizon.kind == HorizonRestriction::Kind::kNone) return ens;
  const ContractionCheck check = check_contraction(ens.model, h, ens.sigma, ens.grid.horizon());
  if (!check.ok || *check.ok) return ens;
  const double target = config.fp_horizon.kind == HorizonRestriction::Kind::kAuto ? check.t_max
                                                                                  : config.fp_horizon.horizon;
  const auto m = static_cast<std::size_t>(std::floor(target / ens.grid.dt() + 1e-9));
  if (m >= ens.grid.n_steps()) return ens;
  if (m < 2) throw ConfigError("restricted horizon leaves fewer than two steps");
  return ens.truncated(m);
}

class ReplicationData {
 public:
  ReplicationData(const ExperimentConfig& config, std::shared_ptr<const ParticleEnsemble> base,
                  HurstParameter h)
      : config_(config), base_(std::move(base)), h_(h) {}

  std::vector<double> estimate(const std::string& estimator) {
    EstimationResult result;
    if (estimator == "ratio") {
      if (!family_) {
        family_ = simulate_shifted_family(base_, config_.settings.epsilon, config_.settings.shift_mode);
      }
      result = ratio_estimator(*family_, config_.settings);
    } else if (estimator == "fixed_point" || estimator == "iterative") {
      if (!restricted_) restricted_ = restricted_for_fixed_point(config_, *base_, h_);
      if (estimator == "fixed_point") {
        result = fixed_point_estimator(*restricted_, h_, config_.settings);
      } else {
        const std::size_t iters = config_.settings.n_iters.value_or(
            default_iteration_count(restricted_->n_particles()));
        result = iterative_estimator(*restricted_, h_, iters, config_.settings.theta_init,
                                     config_.settings.rule);
      }
    } else if (estimator == "contrast") {
      result = contrast_estimator(*base_, h_, config_.settings.contrast_grid);
    } else {
      throw ConfigError("unknown estimator '" + estimator + "'");
    }
    std::vector<double> errors(result.theta_hat.size());
    for (std::size_t m = 0; m < errors.size(); ++m) errors[m] = result.theta_hat[m] - config_.theta0[m];
    return errors;
  }

 private:
  const ExperimentConfig& config_;
  std::shared_ptr<const ParticleEnsemble> base_;
  HurstParameter h_;
  std::optional<ShiftedFamily> family_;
  std::optional<ParticleEnsemble> restricted_;
};

struct Outcome {
  std::optional<std::vector<double>> errors;
  double seconds = 0.0;
};

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

void ExperimentConfig::validate() const {
  const DriftModel m = model_by_key(model);
  if (theta0.size() != m.p()) {
    throw ConfigError("theta0 has " + std::to_string(theta0.size()) + " entries but model '" + model +
                      "' has p = " + std::to_string(m.p()));
  }
  if (h_list.empty() || n_list.empty() || estimators.empty()) {
    throw ConfigError("h_list, n_list and estimators must be non-empty");
  }
  if (mc_reps < 1) throw ConfigError("mc_reps must be at least 1");
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  if (n_steps < 2) throw ConfigError("n_steps must be at least 2");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  for (double h : h_list) {
    HurstParameter hp(h);
    if (h < 0.5) throw ConfigError("the estimators require H >= 1/2 (got " + format_double(h) + ")");
  }
  for (std::size_t n : n_list) {
    if (n < 2) throw ConfigError("every N in n_list must be at least 2");
  }
  for (const auto& e : estimators) {
    if (std::find(estimator_keys().begin(), estimator_keys().end(), e) == estimator_keys().end()) {
      throw ConfigError("unknown estimator '" + e + "' (expected ratio, fixed_point, iterative or contrast)");
    }
    if ((e == "fixed_point" || e == "iterative") && m.p() != 1) {
      throw ConfigError("the " + e + " estimator is restricted to p = 1 (model '" + model + "' has p = " +
                        std::to_string(m.p()) + ")");
    }
    if (e == "ratio" && !(settings.epsilon > 0.0)) throw ConfigError("ratio estimator needs epsilon > 0");
    if (e == "contrast") {
      if (!contrast_grid_set) throw ConfigError("contrast estimator needs a contrast grid");
      settings.contrast_grid.validate(m.p());
    }
  }
  if (fp_horizon.kind == HorizonRestriction::Kind::kFixed && !(fp_horizon.horizon > 0.0)) {
    throw ConfigError("fixed-point horizon restriction must be positive");
  }
}

std::vector<double> replication_errors(const ExperimentConfig& config, const std::string& estimator,
                                       double h, std::size_t n_particles, std::size_t rep) {
  const DriftModel model = model_by_key(config.model);
  const HurstParameter hp(h);
  const FbmSampler sampler(hp, TimeGrid(config.horizon, config.n_steps));
  auto base = std::make_shared<const ParticleEnsemble>(
      simulate_replication(config, model, sampler, n_particles, rep));
  ReplicationData data(config, base, hp);
  return data.estimate(estimator);
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  const DriftModel model = model_by_key(config.model);
  const TimeGrid grid(config.horizon, config.n_steps);
  const std::size_t p = model.p();
  const std::size_t n_est = config.estimators.size();
  const std::size_t total_cells = config.h_list.size() * config.n_list.size();
  std::size_t done = 0;

  std::vector<ResultRow> rows;
  for (double h : config.h_list) {
    const HurstParameter hp(h);
    const FbmSampler sampler(hp, grid);
    for (std::size_t n_particles : config.n_list) {
      std::vector<std::vector<Outcome>> outcomes(config.mc_reps, std::vector<Outcome>(n_est));
      parallel_for(config.mc_reps, config.threads, [&](std::size_t rep) {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        auto base = std::make_shared<const ParticleEnsemble>(
            simulate_replication(config, model, sampler, n_particles, rep));
        const double sim_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        ReplicationData data(config, base, hp);
        for (std::size_t e = 0; e < n_est; ++e) {
          const auto t1 = clock::now();
          try {
            outcomes[rep][e].errors = data.estimate(config.estimators[e]);
          } catch (const NumericalError&) {
            outcomes[rep][e].errors.reset();
          }
          outcomes[rep][e].seconds = sim_seconds + std::chrono::duration<double>(clock::now() - t1).count();
        }
      });

      for (std::size_t e = 0; e < n_est; ++e) {
        std::size_t failures = 0;
        double seconds = 0.0;
        for (std::size_t rep = 0; rep < config.mc_reps; ++rep) {
          if (!outcomes[rep][e].errors) ++failures;
          seconds += outcomes[rep][e].seconds;
        }
        const std::size_t ok = config.mc_reps - failures;
        for (std::size_t m = 0; m < p; ++m) {
          ResultRow row;
          row.estimator = config.estimators[e];
          row.model = config.model;
          row.theta_index = m;
          row.h = h;
          row.n_particles = n_particles;
          row.reps = config.mc_reps;
          row.failures = failures;
          row.valid = failures * 5 <= config.mc_reps && ok > 0;
          row.wall_time_s = seconds;
          // Accumulate in replication order so results do not depend on scheduling.
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t rep = 0; rep < config.mc_reps; ++rep) {
            if (!outcomes[rep][e].errors) continue;
            const double err = (*outcomes[rep][e].errors)[m];
            s1 += err;
            s2 += err * err;
          }
          if (ok == 0) {
            row.rmse = row.bias = row.stderr_rmse = row.stderr_bias = std::numeric_limits<double>::quiet_NaN();
          } else {
            const double k = static_cast<double>(ok);
            row.bias = s1 / k;
            const double msq = s2 / k;
            row.rmse = std::sqrt(msq);
            if (ok > 1) {
              double v1 = 0.0, v2 = 0.0;
              for (std::size_t rep = 0; rep < config.mc_reps; ++rep) {
                if (!outcomes[rep][e].errors) continue;
                const double err = (*outcomes[rep][e].errors)[m];
                v1 += (err - row.bias) * (err - row.bias);
                v2 += (err * err - msq) * (err * err - msq);
              }
              row.stderr_bias = std::sqrt(v1 / (k - 1.0) / k);
              const double se_msq = std::sqrt(v2 / (k - 1.0) / k);
              row.stderr_rmse = row.rmse > 0.0 ? se_msq / (2.0 * row.rmse) : 0.0;
            }
          }
          rows.push_back(row);
        }
      }
      ++done;
      if (progress) progress(done, total_cells);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.estimator, a.h, a.n_particles, a.theta_index) <
           std::tie(b.estimator, b.h, b.n_particles, b.theta_index);
  });
  return rows;
}

void emit_results(const std::vector<ResultRow>& rows, std::ostream& out, const EmitOptions& options) {
  if (rows.empty()) throw ConfigError("no result rows to emit");
  if (options.format == OutputFormat::kCsv) {
    out << "estimator,model,theta_index,H,N,rmse,bias,stderr_rmse,stderr_bias,reps,failures,wall_time_s\n";
    for (const auto& r : rows) {
      out << r.estimator << ',' << r.model << ',' << r.theta_index << ',' << format_double(r.h) << ','
          << r.n_particles << ',' << format_double(r.rmse) << ',' << format_double(r.bias) << ','
          << format_double(r.stderr_rmse) << ',' << format_double(r.stderr_bias) << ',' << r.reps << ','
          << r.failures << ',' << format_double(options.timing ? r.wall_time_s : 0.0) << '\n';
    }
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json j;
      j["estimator"] = r.estimator;
      j["model"] = r.model;
      j["theta_index"] = r.theta_index;
      j["H"] = r.h;
      j["N"] = r.n_particles;
      j["rmse"] = r.rmse;
      j["bias"] = r.bias;
      j["stderr_rmse"] = r.stderr_rmse;
      j["stderr_bias"] = r.stderr_bias;
      j["reps"] = r.reps;
      j["failures"] = r.failures;
      j["valid"] = r.valid;
      j["wall_time_s"] = options.timing ? r.wall_time_s : 0.0;
      arr.push_back(j);
    }
    out << arr.dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("failed to write results");
}

void emit_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                  const EmitOptions& options) {
  if (rows.empty()) throw ConfigError("no result rows to emit");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  emit_results(rows, out, options);
}

std::vector<ResultRow> parse_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty results CSV");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 12) throw ConfigError("malformed results row: " + line);
    ResultRow r;
    r.estimator = f[0];
    r.model = f[1];
    r.theta_index = std::stoul(f[2]);
    r.h = std::stod(f[3]);
    r.n_particles = std::stoul(f[4]);
    r.rmse = std::stod(f[5]);
    r.bias = std::stod(f[6]);
    r.stderr_rmse = std::stod(f[7]);
    r.stderr_bias = std::stod(f[8]);
    r.reps = std::stoul(f[9]);
    r.failures = std::stoul(f[10]);
    r.wall_time_s = std::stod(f[11]);
    r.valid = r.failures * 5 <= r.reps && r.failures < r.reps;
    rows.push_back(r);
  }
  return rows;
}

void print_summary(const std::vector<ResultRow>& rows, std::ostream& out) {
  std::set<std::pair<double, std::size_t>> columns;
  std::map<std::pair<std::string, std::size_t>, std::map<std::pair<double, std::size_t>, const ResultRow*>> table;
  for (const auto& r : rows) {
    columns.insert({r.h, r.n_particles});
    table[{r.estimator, r.theta_index}][{r.h, r.n_particles}] = &r;
  }
  auto cell = [](const ResultRow* r) {
    if (!r) return std::string("-");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.3g (%.3g)%s", r->rmse, r->bias, r->valid ? "" : " invalid");
    return std::string(buf);
  };
  auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
  };
  char buf[96];
  out << pad("", 16);
  for (const auto& [h, n] : columns) {
    std::snprintf(buf, sizeof buf, "H=%g N=%zu", h, n);
    out << ' ' << pad(buf, 22);
  }
  out << '\n';
  for (const auto& [key, cells] : table) {
    out << pad(key.first + "[" + std::to_string(key.second) + "]", 16);
    for (const auto& col : columns) {
      const auto it = cells.find(col);
      out << ' ' << pad(cell(it == cells.end() ? nullptr : it->second), 22);
    }
    out << '\n';
  }
}

}  // namespace fbmips
