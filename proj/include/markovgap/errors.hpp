#pragma once

#include <stdexcept>
#include <string>

namespace markovgap {

// Root of every error the library throws. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: non-Hermitian matrix, bad mask, inconsistent sizes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Covariance spectrum outside [0, 1] beyond tolerance.
class CorruptCovarianceError : public Error {
 public:
  using Error::Error;
};

// Eigensolver failure and similar numerical breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace markovgap
