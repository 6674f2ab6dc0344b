#pragma once

#include <stdexcept>
#include <string>

namespace kcc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input, configuration or precondition violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A state left the opinion domain [-1, 1].
class DomainViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Any failure of a numerical routine (non-convergence, singularity,
/// divergence, non-finite values).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotStabilizable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularSubspace : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergedIterate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonFiniteState : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergedTraining : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RejectionStall : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file exists but does not follow the expected layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcc
