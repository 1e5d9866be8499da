#pragma once

#include <stdexcept>
#include <string>

namespace fsner {

// Error taxonomy. Each class maps to a distinct nonzero exit code in the
// CLI and to a distinct status in the C API.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text: CoNLL, embedding files, config files, episode files.
struct ParseError : Error {
  using Error::Error;
};

// Support/episode sampling could not satisfy the K-shot constraint.
struct SamplingError : Error {
  using Error::Error;
};

// Tensor shape mismatch or violated call contract (wrong arity, bad index).
struct DimensionError : Error {
  using Error::Error;
};

// Checkpoint file rejected: bad magic, version, or truncated payload.
struct CheckpointError : Error {
  using Error::Error;
};

// Numeric failure during optimization (NaN gradient, non-finite loss).
struct TrainError : Error {
  using Error::Error;
};

// Mathematical domain violation (non-positive sigma, tau <= 0, zero norm).
struct DomainError : Error {
  using Error::Error;
};

}  // namespace fsner
