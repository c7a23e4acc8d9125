#pragma once

/** @file errors.hpp
    @brief Exception hierarchy shared by all dcgms modules.

    The CLI maps these onto exit codes: SolverError -> 1, IoError/ParseError -> 2,
    DomainError -> 3.
*/

#include <stdexcept>
#include <string>

namespace dcgms {

/// Invalid argument or precondition (bad sizes, non-positive coefficients, ...).
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be opened, has the wrong shape, or could not be written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed token in a field file or config file.
class ParseError : public IoError {
public:
  using IoError::IoError;
};

/// A linear solve or factorization failed; carries the residual reached, if any.
class SolverError : public std::runtime_error {
public:
  explicit SolverError(const std::string& what, double residual = -1.0)
      : std::runtime_error(what), residual_(residual)
  {
  }

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

} // namespace dcgms
