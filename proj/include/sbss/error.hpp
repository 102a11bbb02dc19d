#pragma once

#include <stdexcept>
#include <string>

namespace sbss {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be symmetric positive definite is not.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& what, int component = -1)
      : Error(what), component_(component) {}

  /// Latent component index for simulation failures, -1 otherwise.
  int component() const noexcept { return component_; }

 private:
  int component_;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// Population diagonal elements are too close for the unmixing problem to be
/// identifiable.
class EigGapTooSmall : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  long line() const noexcept { return line_; }

  /// Same error with `prefix` in front of the message; the line is kept.
  ParseError with_context(const std::string& prefix) const { return ParseError(Raw{}, prefix + what(), line_); }

 private:
  struct Raw {};
  ParseError(Raw, const std::string& message, long line) : Error(message), line_(line) {}

  long line_;
};

}  // namespace sbss
