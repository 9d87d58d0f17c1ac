#pragma once

#include <stdexcept>
#include <string>

namespace slacksac {

/// Bad dimensions, out-of-range hyperparameters, malformed config files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An operation was called in an order its preconditions forbid.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Missing, truncated or corrupt files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace slacksac
