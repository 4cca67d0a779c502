#pragma once

#include <stdexcept>
#include <string>

namespace qshed {

// Error taxonomy used across the library. All conditions are reported by
// throwing one of these; callers that want status codes catch at the boundary
// (CLI, bindings).

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed caller input: non-finite values, dimension mismatches, bad ranges.
class InvalidInput : public Error {
public:
  using Error::Error;
};

// An iterative routine failed to reach its tolerance within its cap.
class NumericalFailure : public Error {
public:
  NumericalFailure(const std::string& msg, double residual)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

// Wire-format violations: bad magic, truncated buffers, state mismatches
// between sender and receiver.
class ProtocolError : public Error {
public:
  using Error::Error;
};

// Refinement input disagrees with previously quantized state.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

// The allocation problem admits no solution under the given budget.
class Infeasible : public Error {
public:
  using Error::Error;
};

// A cost coefficient vanished (tied eigenvalues at the cut).
class DegenerateCoefficient : public Error {
public:
  using Error::Error;
};

// Operation not supported for the given configuration.
class Unsupported : public Error {
public:
  using Error::Error;
};

}  // namespace qshed
