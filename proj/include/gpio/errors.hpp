#pragma once

#include <stdexcept>
#include <string>

namespace gpio {

// Shape or contract violation inside the numerical core.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent dataset on disk.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad experiment configuration (unknown key, wrong type, inconsistent values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss became NaN/Inf during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpio
