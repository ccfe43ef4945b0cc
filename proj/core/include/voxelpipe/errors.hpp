#pragma once

#include <stdexcept>
#include <string>

namespace voxelpipe {

// Error taxonomy mirrors the CLI exit codes: invariant failures exit 1,
// usage/config errors exit 2, I/O errors exit 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace voxelpipe
