#pragma once

#include <stdexcept>
#include <string>

namespace uidkit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input file / record.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A quantity that is mathematically undefined for the given arguments.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative fit that failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace uidkit
