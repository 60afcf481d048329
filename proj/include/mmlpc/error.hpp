#pragma once

#include <stdexcept>
#include <string>

namespace mmlpc {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: shapes, sizes, out-of-range configuration.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Byte-level structure of an input is wrong (length, magic, truncation).
class MalformedInputError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Input carries no information to work with (zero energy, r[0] <= 0, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmlpc
