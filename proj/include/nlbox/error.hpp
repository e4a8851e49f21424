#pragma once

#include <stdexcept>
#include <string>

namespace nlbox {

/// Raised when an argument violates an operation's precondition
/// (bad dimensions, signaling box, unknown name, malformed file).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when the LP stops without a verified optimum. Carries the best
/// bounds on the non-local cost known at the point of failure.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double cost_lower, double cost_upper)
      : std::runtime_error(what), cost_lower_(cost_lower), cost_upper_(cost_upper) {}

  double cost_lower() const noexcept { return cost_lower_; }
  double cost_upper() const noexcept { return cost_upper_; }

 private:
  double cost_lower_;
  double cost_upper_;
};

}  // namespace nlbox
