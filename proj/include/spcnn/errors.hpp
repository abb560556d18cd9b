#pragma once

#include <stdexcept>
#include <string>

namespace spcnn {

// Error taxonomy. The CLI maps ConfigError/DataError/IoError family to
// exit code 2 and NumericError to exit code 3.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A stateful object was used out of order (e.g. pool backward before forward).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class CheckpointCorruptError : public std::runtime_error {
 public:
  explicit CheckpointCorruptError(const std::string& msg) : std::runtime_error(msg) {}
};

class CheckpointVersionError : public std::runtime_error {
 public:
  explicit CheckpointVersionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value detected during training.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spcnn
