#pragma once

#include <stdexcept>
#include <string>

namespace convdysat {

// Base of every error raised by the library. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not agree for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of an operation (log of a non-positive value, fully masked row, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Parameters in a checkpoint do not match the model configuration.
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace convdysat
