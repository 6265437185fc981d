#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pemnet {

/// Invalid physical input (negative current, pump mode where a fuel cell is needed, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input outside the admissible operating window, e.g. i >= i_L.
class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Bad configuration: malformed levels, negative learning rates, missing keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when one is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Corrupt, truncated or version-mismatched binary artifact.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between tensors or between a tensor and a layer.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values during training or inference.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pemnet
