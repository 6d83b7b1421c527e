// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace psdebnn {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input outside the mathematical domain of an operation (e.g. log of a
// nonpositive value).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A caller-side contract was violated (empty set, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (radii ordering, sigma=0 inside a stochastic
// window, mismatched parameter counts, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced during integration or loss evaluation.
// Carries the solver step index at which the value was detected.
class NumericsError : public Error {
 public:
  NumericsError(const std::string& msg, std::size_t step_index)
      : Error(msg + " (step " + std::to_string(step_index) + ")"),
        step_index_(step_index) {}
  std::size_t step_index() const { return step_index_; }

 private:
  std::size_t step_index_;
};

// Malformed input file. Carries the byte offset of the offending field.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace psdebnn
