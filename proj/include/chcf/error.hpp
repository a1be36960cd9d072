#pragma once

#include <stdexcept>
#include <string>

namespace chcf {

// Each error class maps onto one CLI exit code (see tools/chcf_main.cpp).

/// Invalid configuration value, unknown enum tag, or bad command-line usage.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input files, out-of-range indices, shape mismatches.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite gradients or scores encountered during optimization.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chcf
