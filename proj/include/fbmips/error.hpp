#pragma once

#include <stdexcept>
#include <string>

namespace fbmips {

/// Invalid user input: bad parameter ranges, unknown config keys, unsupported
/// estimator/model combinations. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that cannot proceed: non-finite states, singular matrices,
/// divergent iterations. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fbmips
