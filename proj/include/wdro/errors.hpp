#pragma once

#include <stdexcept>
#include <string>

namespace wdro {

struct InvalidConfig : std::runtime_error {
  explicit InvalidConfig(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : InvalidConfig {
  explicit ConfigError(const std::string& msg) : InvalidConfig(msg) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

/// Some marginal probability is too small to be constrained meaningfully.
struct DegenerateMarginal : std::runtime_error {
  explicit DegenerateMarginal(const std::string& msg) : std::runtime_error(msg) {}
};

/// The pinned rows and marginal window admit no row-stochastic assignment.
/// Carries the smallest slack that would make the instance feasible.
struct InfeasibleConstraints : std::runtime_error {
  double min_epsilon;
  InfeasibleConstraints(const std::string& msg, double min_eps)
      : std::runtime_error(msg), min_epsilon(min_eps) {}
};

struct SizeLimitExceeded : std::runtime_error {
  explicit SizeLimitExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnobservedGroup : std::runtime_error {
  explicit UnobservedGroup(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptySplit : std::runtime_error {
  explicit EmptySplit(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyTrainSet : std::runtime_error {
  explicit EmptyTrainSet(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wdro
