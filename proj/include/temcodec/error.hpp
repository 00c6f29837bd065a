#pragma once

#include <stdexcept>
#include <string>

namespace temcodec {

// Base of all library errors. The CLI maps the concrete type to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid invocation: bad option combinations or out-of-range settings.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, parameters, spike streams).
class DataError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to deliver a result within its contract.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace temcodec
