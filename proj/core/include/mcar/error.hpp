#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied data was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An iterate became non-finite or a factorization failed.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Synthetic generation could not satisfy its constraints.
class GenerationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace mcar
