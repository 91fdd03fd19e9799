#pragma once

#include <stdexcept>
#include <string>

namespace nvspin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, inconsistent configuration or malformed input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Eigenvectors could not be assigned unique (ms, mI) labels.
class AmbiguousLabeling : public Error {
 public:
  using Error::Error;
};

/// |D - γe·Bz| too small for the perturbative expressions.
class ValidityMarginError : public Error {
 public:
  using Error::Error;
};

/// Iterative algorithm hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Objective returned NaN or infinity.
class NonFiniteObjective : public Error {
 public:
  using Error::Error;
};

/// Fit problem has no information about the requested parameter.
class NonIdentifiable : public Error {
 public:
  using Error::Error;
};

}  // namespace nvspin
