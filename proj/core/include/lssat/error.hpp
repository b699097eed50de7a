#pragma once

#include <stdexcept>
#include <string>

namespace lssat {

// Base of every error raised by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy a primitive's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain (ratio, lambda, k, step, ...).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data: image files, CSV rows, checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration (unknown key, bad preset, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or activation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lssat
