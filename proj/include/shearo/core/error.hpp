#pragma once

#include <stdexcept>
#include <string>

namespace shearo {

/// Raised when an input violates a documented precondition or invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shearo
