#pragma once

#include <stdexcept>
#include <string>

namespace amcr {

// Error taxonomy, mapped to process exit codes by the CLI:
//   ValidationError (and subclasses) -> exit 1
//   IoError / FormatError            -> exit 2
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/shape contract violations.
struct DimensionError : ValidationError {
  using ValidationError::ValidationError;
};

// Bad configuration (ratios, counts, architecture).
struct ConfigError : ValidationError {
  using ValidationError::ValidationError;
};

// Out-of-range lookups (labels, grid cells).
struct LookupError : ValidationError {
  using ValidationError::ValidationError;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, truncation, unparsable lines).
struct FormatError : IoError {
  using IoError::IoError;
};

}  // namespace amcr
