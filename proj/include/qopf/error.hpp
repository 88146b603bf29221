#pragma once

#include <stdexcept>
#include <string>

namespace qopf {

/// Base class for all errors raised by the library. The CLI maps each
/// subclass to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (schema, topology, dimensions).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An iterative method stopped without meeting its tolerance, or a matrix
/// that must be invertible was not.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The constraint set of an optimization problem is empty.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, int bus) : Error(what), bus_(bus) {}
  int bus() const { return bus_; }

 private:
  int bus_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qopf
