#pragma once

#include <stdexcept>
#include <string>

namespace mmdflow {

/// Bad arguments to an operation (dimension mismatch, out-of-range index, ...).
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid experiment configuration or map/distribution parameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A step-size schedule cannot be formed from the given inputs.
class ScheduleError : public std::runtime_error {
 public:
  explicit ScheduleError(const std::string& what) : std::runtime_error(what) {}
};

/// A block failed its 1/2-Lipschitz certificate at construction.
class ConstructionError : public std::runtime_error {
 public:
  explicit ConstructionError(const std::string& what) : std::runtime_error(what) {}
};

/// A numeric contract was violated at run time (iteration budget exhausted,
/// per-block descent below the certified rate, degenerate fit, ...).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mmdflow
