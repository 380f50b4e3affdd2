#pragma once

#include <stdexcept>
#include <string>

namespace lqmf {

// Thrown when a control pair falls outside the admissible set, i.e. one of
// the closed loops violates gamma * sigma_max(.)^2 < 1.
class AdmissibilityError : public std::runtime_error {
 public:
  explicit AdmissibilityError(const std::string& what) : std::runtime_error(what) {}
};

// Fixed-point iterations that fail to converge, singular inner matrices, etc.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

// A policy-gradient step could not be made admissible after backtracking.
// Carries the index of the failing iterate; the driver attaches the partial
// trace before rethrowing to the CLI.
class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, int iterate_index)
      : std::runtime_error(what), iterate(iterate_index) {}
  int iterate;
};

// Malformed model data or experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lqmf
