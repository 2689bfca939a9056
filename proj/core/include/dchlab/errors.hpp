#pragma once

#include <stdexcept>
#include <string>

namespace dchlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: negative densities, zero mass, inconsistent sizes.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain where a function is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A user supplied evaluator produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The potential breaks one of the standing structural assumptions
/// (for instance an unstable set with too many components).
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

/// A single time step could not be completed. Callers usually retry with a
/// smaller step.
class StepFailure : public Error {
 public:
  using Error::Error;
};

/// Configuration documents that fail validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dchlab
