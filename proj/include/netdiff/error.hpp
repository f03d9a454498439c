#pragma once

#include <stdexcept>
#include <string>

namespace netdiff {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes: configuration/data faults exit 1, numeric failures exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

// Outcome vector has a single class; likelihood-based fits are undefined.
class DegenerateData : public Error {
 public:
  using Error::Error;
};

// Newton iterations did not settle, typically under perfect separation.
class DivergingCoefficients : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

}  // namespace netdiff
