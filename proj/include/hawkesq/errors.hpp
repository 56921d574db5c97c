#pragma once

#include <stdexcept>
#include <string>

namespace hawkesq {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed kernels, unsupported options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A query outside the domain a precomputed object covers (e.g. t beyond a grid).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Solver failure, non-convergence, singular systems, indefinite covariances.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Divergent kernel integrals (power law with exponent <= 1 and similar).
class IntegrabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Stationarity violations and runaway clusters.
class StabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace hawkesq
