// fbm-ips: simulate fBm-driven particle systems and estimate their drift.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "fbmips/config.hpp"
#include "fbmips/error.hpp"
#include "fbmips/estimators.hpp"
#include "fbmips/fbm.hpp"
#include "fbmips/malliavin.hpp"
#include "fbmips/mc_harness.hpp"
#include "fbmips/variance.hpp"

namespace {

using namespace fbmips;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string format = "csv";
  bool summary = false;
  bool timing = false;
  bool verbose = false;
  std::string estimator;
  std::string what = "states";
};

AppConfig load(const Options& opt) {
  std::string text;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot read config file '" + opt.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  AppConfig cfg = parse_config_with_overrides(text, opt.overrides);
  if (opt.seed) cfg.experiment.master_seed = cfg.poc.seed = cfg.variance.seed = *opt.seed;
  cfg.experiment.threads = cfg.poc.threads = cfg.variance.threads = opt.threads;
  return cfg;
}

// Writes through `body` to --out, or to stdout when none is given.
template <class Body>
void with_output(const std::string& path, Body&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  body(out);
}

ParticleEnsemble simulate_dataset(const ExperimentConfig& ex) {
  const DriftModel model = model_by_key(ex.model);
  if (ex.theta0.size() != model.p()) throw ConfigError("theta0 length does not match model '" + ex.model + "'");
  const HurstParameter h(ex.h_list.front());
  const TimeGrid grid(ex.horizon, ex.n_steps);
  const std::size_t n = ex.n_list.front();
  auto noise = std::make_shared<const FbmEnsemble>(FbmSampler(h, grid).sample(n, ex.master_seed, 0));
  const auto initial = ex.initial.draw(n, ex.master_seed, 0);
  return euler_simulate(model, ex.theta0, ex.sigma, initial, std::move(noise));
}

int run_simulate(const Options& opt) {
  const AppConfig cfg = load(opt);
  const ParticleEnsemble ens = simulate_dataset(cfg.experiment);
  with_output(opt.out, [&](std::ostream& out) {
    if (opt.what == "fbm") {
      write_fbm_csv(*ens.noise, out);
    } else {
      write_ensemble_csv(ens, out);
    }
  });
  return 0;
}

int run_estimate(const Options& opt) {
  AppConfig cfg = load(opt);
  ExperimentConfig& ex = cfg.experiment;
  if (!opt.estimator.empty()) ex.estimators = {opt.estimator};
  ex.validate();
  const HurstParameter h(ex.h_list.front());
  auto base = std::make_shared<const ParticleEnsemble>(simulate_dataset(ex));
  nlohmann::json results = nlohmann::json::array();
  for (const auto& name : ex.estimators) {
    EstimationResult r;
    if (name == "ratio") {
      r = ratio_estimator(simulate_shifted_family(base, ex.settings.epsilon, ex.settings.shift_mode), ex.settings);
    } else if (name == "fixed_point") {
      r = fixed_point_estimator(*base, h, ex.settings);
    } else if (name == "iterative") {
      r = iterative_estimator(*base, h, ex.settings.n_iters.value_or(default_iteration_count(base->n_particles())),
                              ex.settings.theta_init, ex.settings.rule);
    } else {
      r = contrast_estimator(*base, h, ex.settings.contrast_grid);
    }
    results.push_back(r.to_json());
  }
  with_output(opt.out, [&](std::ostream& out) { out << results.dump(2) << '\n'; });
  return 0;
}

int run_mc_table(const Options& opt) {
  const AppConfig cfg = load(opt);
  ProgressFn progress;
  if (opt.verbose) {
    progress = [](std::size_t done, std::size_t total) {
      std::cerr << "cell " << done << "/" << total << " done\n";
    };
  }
  const auto rows = run_experiment(cfg.experiment, progress);
  EmitOptions emit;
  emit.format = opt.format == "json" ? OutputFormat::kJson : OutputFormat::kCsv;
  emit.timing = opt.timing;
  const std::string path = opt.out.empty() ? (opt.format == "json" ? "results.json" : "results.csv") : opt.out;
  with_output(path, [&](std::ostream& out) { emit_results(rows, out, emit); });
  if (opt.summary) print_summary(rows, std::cout);
  return 0;
}

int run_poc_check(const Options& opt) {
  const AppConfig cfg = load(opt);
  const ExperimentConfig& ex = cfg.experiment;
  const DriftModel model = model_by_key(ex.model);
  const auto rows = poc_rate_report(model, ex.theta0, ex.sigma, HurstParameter(ex.h_list.front()),
                                    TimeGrid(ex.horizon, ex.n_steps), ex.initial, cfg.poc);
  with_output(opt.out.empty() ? "poc_rates.csv" : opt.out, [&](std::ostream& out) { write_poc_csv(rows, out); });
  if (opt.summary) write_poc_csv(rows, std::cout);
  return 0;
}

int run_variance(const Options& opt) {
  const AppConfig cfg = load(opt);
  const ExperimentConfig& ex = cfg.experiment;
  const auto est = asymptotic_variance_mc(model_by_key(ex.model), ex.theta0, ex.sigma,
                                          HurstParameter(ex.h_list.front()), TimeGrid(ex.horizon, ex.n_steps),
                                          cfg.variance);
  with_output(opt.out, [&](std::ostream& out) { out << est.to_json().dump(2) << '\n'; });
  return 0;
}

std::size_t default_threads() {
  if (const char* env = std::getenv("FBM_IPS_THREADS")) {
    try {
      const auto v = std::stoul(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid FBM_IPS_THREADS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and drift estimation for particle systems driven by fractional Brownian motion"};
  app.require_subcommand(1);
  Options opt;
  opt.threads = default_threads();

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "INI config file");
    sub->add_option("--set", opt.overrides, "override section.key=value (repeatable)");
    sub->add_option("--out", opt.out, "output path");
    sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
    sub->add_option("--threads", opt.threads, "worker threads (default FBM_IPS_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", opt.verbose, "progress on stderr");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate one particle system and export it as CSV");
  common(simulate);
  simulate->add_option("--what", opt.what, "states or fbm")->check(CLI::IsMember({"states", "fbm"}));

  auto* estimate = app.add_subcommand("estimate", "estimate theta from one simulated dataset");
  common(estimate);
  estimate->add_option("--estimator", opt.estimator, "ratio, fixed_point, iterative or contrast")
      ->check(CLI::IsMember({"ratio", "fixed_point", "iterative", "contrast"}));

  auto* mc = app.add_subcommand("mc-table", "Monte Carlo RMSE and bias table");
  common(mc);
  mc->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  mc->add_flag("--summary", opt.summary, "print an RMSE (Bias) table");
  mc->add_flag("--timing", opt.timing, "record wall times (output is then not reproducible)");

  auto* poc = app.add_subcommand("poc-check", "propagation-of-chaos rate report");
  common(poc);
  poc->add_flag("--summary", opt.summary, "echo the rate table");

  auto* variance = app.add_subcommand("variance", "Monte Carlo asymptotic variance constants");
  common(variance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) return run_simulate(opt);
    if (*estimate) return run_estimate(opt);
    if (*mc) return run_mc_table(opt);
    if (*poc) return run_poc_check(opt);
    if (*variance) return run_variance(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
