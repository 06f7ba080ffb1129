#pragma once

#include <stdexcept>
#include <string>

namespace energyate {

/// Base class of every error raised by the library. Callers that only need
/// to distinguish "bad input" from "bug" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArchitectureError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

class InvalidDataError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class PositivityError : public Error {
 public:
  using Error::Error;
};

/// Malformed numeric content in an input file. Carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace energyate
