#pragma once

#include <stdexcept>
#include <string>

namespace cafv {

// Bad user input: CLI arguments, configs, labels, malformed data files.
// The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor or graph shape problems (a kind of validation failure).
struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};

// Unreadable or malformed on-disk artifacts.
struct IoError : ValidationError {
  using ValidationError::ValidationError;
};

// Non-finite values where finite math is required (aborted optimizer steps,
// diverged training). The CLI maps these to exit code 2.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cafv
