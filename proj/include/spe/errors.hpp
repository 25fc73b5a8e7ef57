#pragma once

#include <stdexcept>
#include <string>

namespace spe {

// Shapes or dimensions that do not conform to an operation's contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced, or a domain error such as log of a non-positive value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or inconsistent model/dataset pairing.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing files, short reads, malformed manifests.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spe
