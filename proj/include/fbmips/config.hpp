#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fbmips/malliavin.hpp"
#include "fbmips/mc_harness.hpp"
#include "fbmips/variance.hpp"

namespace fbmips {

/// Everything a config file can set. Sections and keys:
///
///   [experiment] model theta0 H N T n_steps sigma estimators mc_reps seed
///                initial threads
///   [integrals]  rule = forward | trapezoid
///   [ratio]      epsilon shift_mode = exact | frozen
///   [fixed_point] tol max_iter theta_init restrict_horizon = none | auto | <T>
///   [iterative]  n_iters = auto | <count>
///   [contrast]   lo hi mesh            (one value per parameter coordinate)
///   [poc]        N reps s_fractions
///   [variance]   n_mc n_ref
///
/// Lists are comma separated. `initial` is `normal`, `constant:<x>` or
/// `values:<x1>,<x2>,...`.
struct AppConfig {
  ExperimentConfig experiment;
  PocSettings poc;
  VarianceSettings variance;
};

/// Parses INI text. Unknown sections or keys are a ConfigError listing all
/// of them; so are malformed values.
AppConfig parse_config(std::istream& in);
AppConfig load_config(const std::filesystem::path& path);

/// Applies `section.key=value` overrides on top of `text` and parses.
AppConfig parse_config_with_overrides(const std::string& text, const std::vector<std::string>& overrides);

}  // namespace fbmips
