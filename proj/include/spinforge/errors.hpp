#pragma once

#include <stdexcept>
#include <string>

namespace spinforge {

// Error categories mirror the CLI exit codes: 2 config, 3 numerical,
// 4 constraint violation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstraintViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spinforge
