#pragma once

#include <stdexcept>
#include <string>

namespace modefusion {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, negative entries, duplicate ids, bad config.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Degenerate numerical input (zero norms, constant vectors, zero divisors).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// File system and parse failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace modefusion
