#pragma once

#include <stdexcept>
#include <string>

namespace lp2s {

// Bad inputs: out-of-range counts, malformed priors, inconsistent instances.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numeric routine (quadrature, continued fraction) missed its accuracy target.
class NumericAccuracyError : public std::runtime_error {
 public:
  NumericAccuracyError(const std::string& what, double achieved_error)
      : std::runtime_error(what), achieved_error_(achieved_error) {}
  double achieved_error() const { return achieved_error_; }

 private:
  double achieved_error_;
};

// Posterior with zero mass (a Discrete prior that cannot produce the data).
class DegeneratePosteriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Prior whose R-th moment vanishes.
class DegeneratePriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The LP has no feasible point even at the loosest quality level.
class InfeasibleInstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown or unboundedness inside the LP solver. Distinct from an
// infeasible status, which is a regular outcome.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExtractionInconsistency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RepairFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Batch protocol violations and out-of-order policy calls.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lp2s
