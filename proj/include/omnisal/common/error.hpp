#pragma once

#include <stdexcept>
#include <string>

namespace omnisal {

// Malformed or inconsistent input data (files, shapes, ranges).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension mismatch between operands.
class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

// Non-finite value detected where finite arithmetic is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace omnisal
