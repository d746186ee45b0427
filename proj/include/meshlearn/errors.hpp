#pragma once

#include <stdexcept>
#include <string>

namespace meshlearn {

// Tensor dimension mismatch; messages name both offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad runtime input (out-of-range label, empty batch, stale cache).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid experiment configuration (unknown preset, missing pipeline, bad key).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents (wrong magic, truncated stream, unparsable CSV).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure; messages include the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace meshlearn
