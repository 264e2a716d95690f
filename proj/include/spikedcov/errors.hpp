#pragma once

#include <stdexcept>
#include <string>

namespace spikedcov {

// All library failures derive from Error so callers (the CLI in particular)
// can map them to a single runtime-error exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// CSV parse failure with a 1-based row/column location.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : InputError(what), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or run settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant no longer holds (orthogonality, cache coherence, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spikedcov
