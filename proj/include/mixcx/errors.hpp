#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixcx {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied arguments that violate a precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public InputError {
 public:
  using InputError::InputError;
};

class InsufficientDataError : public InputError {
 public:
  using InputError::InputError;
};

class InvalidAssignmentError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed external data (files).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Failures of the numerical routines themselves.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateModelError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// log f(x_n) fell below the double underflow threshold.
class NumericalDomainError : public NumericalError {
 public:
  NumericalDomainError(const std::string& what, std::size_t index)
      : NumericalError(what + " (point index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class FitFailureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepFailureError : public NumericalError {
 public:
  StepFailureError(const std::string& what, std::size_t timestep)
      : NumericalError("t=" + std::to_string(timestep) + ": " + what), timestep_(timestep) {}
  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t timestep_;
};

}  // namespace mixcx
