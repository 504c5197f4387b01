#pragma once
// Closed-form cost and regret bounds, and checks of observed values against them.

#include <optional>
#include <string>
#include <vector>

#include "lp2s/prior.hpp"

namespace lp2s {

struct BoundReport {
  std::string name;
  double bound = 0.0;
  std::optional<double> observed;
  bool satisfied = true;  // vacuous when nothing was observed
  double slack = 0.0;     // bound - observed
};

BoundReport check_bound(std::string name, double bound, std::optional<double> observed, double tol = 0.0);

// (L / (K E mu^R)) sum_{r=1}^R E mu^r. Throws DegeneratePriorError when E mu^R = 0.
double thm2_bound(const PriorSpec& prior, int K, int R, double L);

struct RateRegime {
  std::string label;  // "0<b<1", "b=1" or "b>1"
  double value;
};

RateRegime corollary_rate(double a, double b, int R, double L, int K);

// K f* + L R.
double expected_total_cost(double f_star, int K, double L, int R);

// e^{-L} + 1 - delta0.
double thm4_bound(double L, double delta0);

struct Thm3Bound {
  double miss_probability;
  double bsr;
};

Thm3Bound thm3_bound(double mu0, double L, int R, double delta0, double C1, double C2);

struct Thm5Bound {
  double one_minus_bpb;
  double bsr_first;
  double bsr_second;
  double bsr;  // min of the two
};

// Raw values, neither clamped to [0,1] nor sign-checked.
Thm5Bound thm5_bound(double L, double delta0, int K, int R, double alpha0, double c, double C1, double C2,
                     double C3);

struct AssumptionReport {
  bool tail_ok = false;
  double worst_tail_margin = 0.0;  // min over d of F(1-d) - (1 - d^alpha)
  double worst_d = 0.0;
  bool lipschitz_ok = false;
  double lipschitz_estimate = 0.0;  // sup of the density on a grid; infinite if unbounded
};

AssumptionReport assumption_fc_diagnostic(const PriorSpec& prior, double alpha, const std::vector<double>& d_grid);

}  // namespace lp2s
