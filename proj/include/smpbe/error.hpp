#pragma once

#include <stdexcept>
#include <string>

namespace smpbe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (files, parameters, geometry).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to meet its contract (divergence, breakdown).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace smpbe
