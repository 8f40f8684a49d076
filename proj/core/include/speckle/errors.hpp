#pragma once

#include <stdexcept>
#include <string>

namespace speckle {

/// Invalid or incomplete run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, divergence, or other numerical breakdown. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, malformed or unwritable files. CLI exit code 4.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace speckle
