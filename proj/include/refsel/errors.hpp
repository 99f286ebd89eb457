#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace refsel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration values; the message names the field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: dimension mismatches, non-finite values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable data files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Degenerate fits, domain errors and solver non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  SamplerError(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace refsel
