#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace homog {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A constructor or operation argument is outside its documented range.
// The message names the offending field.
class InvalidParameter : public Error {
public:
  using Error::Error;
};

// A map-only operation was called on a flow, or vice versa.
class WrongKind : public Error {
public:
  using Error::Error;
};

// Statistical estimation was requested in a regime where the underlying
// series does not converge (nonsummable correlations).
class NotEstimable : public Error {
public:
  using Error::Error;
};

// Not enough samples / orbit length / ensemble members for the estimator.
class InsufficientData : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

// A state, derivative or integrator output became NaN/Inf.
class NonFiniteState : public Error {
public:
  using Error::Error;
};

// A requested time does not lie on the stored grid of a path.
class OffGridTime : public Error {
public:
  using Error::Error;
};

// Trajectory escaped the blowup guard.
class BlowupError : public Error {
public:
  using Error::Error;
};

// Configuration validation failure: carries the complete list of violations.
class ConfigError : public Error {
public:
  ConfigError(std::string summary, std::vector<std::string> violations)
      : Error(std::move(summary)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

private:
  std::vector<std::string> violations_;
};

}  // namespace homog
