#pragma once
// Sparse revised simplex for min c'x s.t. rows, x >= 0.
//
// A presolve pass fixes equality singletons and substitutes out columns that
// an equality row expresses as a nonnegative combination of the others.
// Two phases with artificial variables, product-form basis updates on top of
// an Eigen SparseLU factorization, Dantzig pricing with a Bland fallback
// under stalling, and a Harris two-pass ratio test. Final values come from a
// fresh factorization, so residuals are at rounding level.

#include <string>
#include <vector>

#include "lp2s/lp_model.hpp"

namespace lp2s {

enum class SolveStatus { Optimal, Infeasible };

std::string to_string(SolveStatus s);

struct SolverOptions {
  double feasibility_tol = 1e-10;  // Harris relaxation on basic values
  double optimality_tol = 1e-10;   // reduced-cost threshold
  double pivot_tol = 1e-7;
  double phase1_tol = 1e-9;  // residual infeasibility accepted as feasible
  int max_iterations = 500000;
  int refactor_interval = 80;
  int stall_limit = 200;  // degenerate pivots before switching to Bland's rule
  bool phase1_only = false;
};

struct LpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> values;
  double objective = 0.0;
  double max_eq_residual = 0.0;
  double max_ineq_violation = 0.0;
  // |primal - dual| / max(1, |primal|) at the final basis.
  double optimality_gap = 0.0;
  double max_dual_infeasibility = 0.0;
  int iterations = 0;
  std::string infeasibility_reason;
  std::vector<int> violated_rows;  // rows carrying phase-1 infeasibility
};

LpSolution solve_lp(const LpProblem& problem, const SolverOptions& options = {});

// Phase 1 only.
bool lp_feasible(const LpProblem& problem, const SolverOptions& options = {});

// Residuals of an arbitrary point against the unscaled rows.
struct Residuals {
  double max_eq = 0.0;
  double max_ineq = 0.0;
  double min_value = 0.0;
};
Residuals compute_residuals(const LpProblem& problem, const std::vector<double>& x);

double objective_value(const LpProblem& problem, const std::vector<double>& x);

}  // namespace lp2s
