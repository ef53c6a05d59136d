#pragma once

#include <stdexcept>
#include <string>

namespace thermoloss {

// Base class for every error raised by the library. The CLI maps these to
// exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

// Raised when an iterative procedure produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  kMalformedHeader,
  kUnsupportedMaxval,
  kTruncatedPayload,
  kBadValue,
  kIo,
};

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace thermoloss
