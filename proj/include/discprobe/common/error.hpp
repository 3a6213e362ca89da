#pragma once

#include <stdexcept>
#include <string>

namespace discprobe {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed external input (treebank files, JSON, CSV, TSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input that parses but breaks a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A file or resource that cannot be opened or resolved.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace discprobe

namespace discprobe {

// Training produced a non-finite loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace discprobe
