#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lsm {

/// Bad argument shape, size or value supplied to a public operation.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A representation or signal has no direction (zero norm, zero power).
class DegenerateInputError : public InputError {
 public:
  DegenerateInputError(const std::string& what, std::size_t index)
      : InputError(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Out-of-range hyperparameter (k, m, bits...).
class ParameterError : public InputError {
 public:
  using InputError::InputError;
};

/// Inconsistent experiment or regularizer configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed dataset or checkpoint file.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace lsm
