#ifndef TABCL_ERRORS_HPP
#define TABCL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tabcl {

// Configuration problems (bad keys, invalid pairings, out-of-range values).
// The CLI maps these to exit code 2; everything else maps to 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (ragged rows, truncated cache, bad magic).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inputs that parse but violate the expected schema (unknown label string,
// missing month column, mismatched dimensions between rows).
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatches between numeric objects.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or other numeric breakdown during training.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace tabcl

#endif
