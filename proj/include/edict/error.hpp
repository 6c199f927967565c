#pragma once

#include <stdexcept>
#include <string>

namespace edict {

// Base of everything the library throws on contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

enum class IoErrorKind { open_failed, bad_magic, truncated, zero_rank, bad_header, write_failed };

const char* to_string(IoErrorKind kind);

class IoError : public Error {
 public:
  IoError(IoErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  IoErrorKind kind() const noexcept { return kind_; }

 private:
  IoErrorKind kind_;
};

// Non-finite values where finiteness is required (e.g. a NaN training loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace edict
