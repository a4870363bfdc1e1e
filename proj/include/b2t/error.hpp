#pragma once

#include <stdexcept>
#include <string>

namespace b2t {

// Base exception for every recoverable failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input files or manifests that are missing or malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

// Inputs that violate a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace b2t
