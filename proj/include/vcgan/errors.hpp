#pragma once

#include <stdexcept>
#include <string>

namespace vcgan {

/// Operand shapes or sizes do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid argument, configuration value or file content. Maps to CLI exit 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file could not be read or written. Maps to CLI exit 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or non-finite value met during training or optimization. Maps to CLI exit 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vcgan
