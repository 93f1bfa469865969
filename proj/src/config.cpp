#include "fbmips/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fbmips/error.hpp"

namespace fbmips {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment",
       {"model", "theta0", "H", "N", "T", "n_steps", "sigma", "estimators", "mc_reps", "seed", "initial",
        "threads"}},
      {"integrals", {"rule"}},
      {"ratio", {"epsilon", "shift_mode"}},
      {"fixed_point", {"tol", "max_iter", "theta_init", "restrict_horizon"}},
      {"iterative", {"n_iters"}},
      {"contrast", {"lo", "hi", "mesh"}},
      {"poc", {"N", "reps", "s_fractions"}},
      {"variance", {"n_mc", "n_ref"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError("'" + key + "': empty list");
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(static_cast<std::size_t>(to_u64(key, item)));
  if (out.empty()) throw ConfigError("'" + key + "': empty list");
  return out;
}

InitialCondition to_initial(const std::string& v) {
  if (v == "normal") return InitialCondition::standard_normal();
  if (v.rfind("constant:", 0) == 0) return InitialCondition::fixed(to_double("experiment.initial", v.substr(9)));
  if (v.rfind("values:", 0) == 0) return InitialCondition::list(to_doubles("experiment.initial", v.substr(7)));
  throw ConfigError("'experiment.initial': expected normal, constant:<x> or values:<list>, got '" + v + "'");
}

AppConfig from_tree(const pt::ptree& tree) {
  std::vector<std::string> unknown;
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (body.empty()) {
      unknown.push_back(section);
      continue;
    }
    if (it == known_keys().end()) {
      unknown.push_back("[" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) unknown.push_back(section + "." + key);
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
    const auto node = tree.get_child_optional(pt::ptree::path_type(section + "/" + key, '/'));
    if (!node) return std::nullopt;
    return trim(node->data());
  };

  AppConfig cfg;
  ExperimentConfig& ex = cfg.experiment;
  if (auto v = get("experiment", "model")) ex.model = *v;
  if (auto v = get("experiment", "theta0")) ex.theta0 = to_doubles("experiment.theta0", *v);
  if (auto v = get("experiment", "H")) {
    ex.h_list = to_doubles("experiment.H", *v);
    for (double h : ex.h_list) HurstParameter{h};
  }
  if (auto v = get("experiment", "N")) ex.n_list = to_sizes("experiment.N", *v);
  if (auto v = get("experiment", "T")) ex.horizon = to_double("experiment.T", *v);
  if (auto v = get("experiment", "n_steps")) ex.n_steps = to_u64("experiment.n_steps", *v);
  if (auto v = get("experiment", "sigma")) ex.sigma = to_double("experiment.sigma", *v);
  if (auto v = get("experiment", "estimators")) ex.estimators = split_list(*v);
  if (auto v = get("experiment", "mc_reps")) ex.mc_reps = to_u64("experiment.mc_reps", *v);
  if (auto v = get("experiment", "seed")) ex.master_seed = to_u64("experiment.seed", *v);
  if (auto v = get("experiment", "initial")) ex.initial = to_initial(*v);
  if (auto v = get("experiment", "threads")) ex.threads = to_u64("experiment.threads", *v);

  if (auto v = get("integrals", "rule")) {
    if (*v == "forward") {
      ex.settings.rule = IntegralRule::kForward;
    } else if (*v == "trapezoid") {
      ex.settings.rule = IntegralRule::kTrapezoid;
    } else {
      throw ConfigError("'integrals.rule': expected forward or trapezoid, got '" + *v + "'");
    }
  }
  if (auto v = get("ratio", "epsilon")) ex.settings.epsilon = to_double("ratio.epsilon", *v);
  if (auto v = get("ratio", "shift_mode")) {
    if (*v == "exact") {
      ex.settings.shift_mode = ShiftMode::kExact;
    } else if (*v == "frozen") {
      ex.settings.shift_mode = ShiftMode::kFrozen;
    } else {
      throw ConfigError("'ratio.shift_mode': expected exact or frozen, got '" + *v + "'");
    }
  }
  if (auto v = get("fixed_point", "tol")) ex.settings.fp_tol = to_double("fixed_point.tol", *v);
  if (auto v = get("fixed_point", "max_iter")) ex.settings.fp_max_iter = to_u64("fixed_point.max_iter", *v);
  if (auto v = get("fixed_point", "theta_init")) {
    if (*v != "auto") ex.settings.theta_init = to_double("fixed_point.theta_init", *v);
  }
  if (auto v = get("fixed_point", "restrict_horizon")) {
    if (*v == "none") {
      ex.fp_horizon.kind = HorizonRestriction::Kind::kNone;
    } else if (*v == "auto") {
      ex.fp_horizon.kind = HorizonRestriction::Kind::kAuto;
    } else {
      ex.fp_horizon.kind = HorizonRestriction::Kind::kFixed;
      ex.fp_horizon.horizon = to_double("fixed_point.restrict_horizon", *v);
    }
  }
  if (auto v = get("iterative", "n_iters")) {
    if (*v != "auto") ex.settings.n_iters = to_u64("iterative.n_iters", *v);
  }
  const auto lo = get("contrast", "lo"), hi = get("contrast", "hi"), mesh = get("contrast", "mesh");
  if (lo || hi || mesh) {
    if (!lo || !hi || !mesh) throw ConfigError("[contrast] needs lo, hi and mesh together");
    ex.settings.contrast_grid = {to_doubles("contrast.lo", *lo), to_doubles("contrast.hi", *hi),
                                 to_doubles("contrast.mesh", *mesh)};
    ex.contrast_grid_set = true;
  }
  if (auto v = get("poc", "N")) cfg.poc.n_list = to_sizes("poc.N", *v);
  if (auto v = get("poc", "reps")) cfg.poc.reps = to_u64("poc.reps", *v);
  if (auto v = get("poc", "s_fractions")) cfg.poc.s_fractions = to_doubles("poc.s_fractions", *v);
  if (auto v = get("variance", "n_mc")) cfg.variance.n_mc = to_u64("variance.n_mc", *v);
  if (auto v = get("variance", "n_ref")) cfg.variance.n_ref = to_u64("variance.n_ref", *v);

  cfg.poc.seed = cfg.variance.seed = ex.master_seed;
  cfg.poc.threads = cfg.variance.threads = ex.threads;
  cfg.variance.initial = ex.initial;
  return cfg;
}

}  // namespace

AppConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return from_tree(tree);
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  return parse_config(in);
}

AppConfig parse_config_with_overrides(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + o + "' is not of the form section.key=value");
    }
    tree.put(pt::ptree::path_type(trim(o.substr(0, eq)), '.'), trim(o.substr(eq + 1)));
  }
  return from_tree(tree);
}

}  // namespace fbmips
