#pragma once

#include <stdexcept>
#include <string>

namespace preddiff {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Width or column mismatch between rows, datasets, feature sets and models.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value was violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The model produced output that breaks its declared contract.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Singular covariances, vanishing probabilities and similar failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration over 2^N coalitions refused for N above the limit.
class CostGuardError : public Error {
 public:
  using Error::Error;
};

/// Malformed line or message on the model bridge.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Process-level failure of a bridge worker (spawn, exit, timeout).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Input files and command-line configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace preddiff
