#pragma once

#include <stdexcept>
#include <string>

namespace npspec {

/// Invalid input: bad parameters, malformed configuration, violated preconditions.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A computation ran but produced an unusable result (factorization failure,
/// non-convergence, degenerate geometry).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace npspec
