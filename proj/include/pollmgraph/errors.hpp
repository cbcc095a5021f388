#pragma once

#include <stdexcept>
#include <string>

namespace pollmgraph {

// Base for every failure raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or invariant violated by caller-supplied data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input that cannot be parsed at all (bad magic, malformed JSON, short file).
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Numerical fitting failed (e.g. a mixture component collapsed twice).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace pollmgraph
