#pragma once

#include <stdexcept>
#include <string>

namespace semi3 {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller violated a precondition (odd batch size, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed checkpoint, manifest or tensor file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration or backbone layout.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace semi3
