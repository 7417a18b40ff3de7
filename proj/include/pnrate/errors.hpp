#pragma once

#include <stdexcept>
#include <string>

namespace pnrate {

/// Invalid parameters or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A recursion produced a non-finite or all-zero intermediate.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pnrate
