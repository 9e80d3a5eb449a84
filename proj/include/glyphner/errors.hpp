#pragma once

#include <stdexcept>
#include <string>

namespace glyphner {

// Base for every error the library raises. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class FormatFault {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kDuplicateKey,
  kBadValue,
  kMismatch,
};

class FormatError : public Error {
 public:
  FormatError(FormatFault fault, const std::string& what) : Error(what), fault_(fault) {}
  FormatFault fault() const noexcept { return fault_; }

 private:
  FormatFault fault_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses, gradients or updates.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace glyphner
