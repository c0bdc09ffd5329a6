#pragma once

#include <stdexcept>
#include <string>

namespace upisp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bytes or files: bad magic, truncation, length mismatch.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A value outside its documented domain (e.g. a 10-bit sample above 1023).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Incompatible sizes, layers or dimensions between arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or inputs detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace upisp
