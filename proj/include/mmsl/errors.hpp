#pragma once

#include <stdexcept>
#include <string>

namespace mmsl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input text. Messages carry a location
/// (line number or record id) whenever one exists.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value or combination of values violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (solver divergence, no admissible
/// solution, evaluation outside the law's valid region).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmsl
