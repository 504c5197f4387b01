#pragma once
// From an optimal LP-ind point to a playable per-arm policy: action
// extraction, threshold detection, threshold repair, and a brute-force
// threshold oracle for small trees.

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "lp2s/lp_model.hpp"
#include "lp2s/simplex.hpp"

namespace lp2s {

// Action a(r,s) for 0 <= r <= R-1 is the probability that an arm in state
// (r,s) is pulled again; reach is the LP mass P(r,s).
struct ActionTable {
  int R = 0;
  double eps_reach = 0.0;
  std::vector<double> a;  // by IndexMap::node_id, r < R
  std::vector<double> reach;

  double action(int r, int s) const;
  double reach_at(int r, int s) const;
  bool reachable(int r, int s) const { return reach_at(r, s) > eps_reach; }
};

// Reachability cutoff relative to the terminal mass.
double reach_epsilon(double survival);

// Throws ExtractionInconsistency when the two forms of the action formula
// disagree by more than 1e-4 on a reachable state.
ActionTable extract_actions(const LpSolution& sol, const LpProblem& problem);

// The largest per-round gap between the two forms of the action formula.
double action_form_disagreement(const LpSolution& sol, const LpProblem& problem);

struct ThresholdPolicy {
  std::vector<int> s_star;   // per round r = 0..R-1
  std::vector<double> frac;  // action at s = s_star(r)

  int rounds() const { return static_cast<int>(s_star.size()); }
  double action(int r, int s) const;
};

struct NonThresholdReport {
  struct Entry {
    int r;
    int s;
    double action;
    double reach;
  };
  std::vector<Entry> offenders;
  std::string reason;
};

using ThresholdResult = std::variant<ThresholdPolicy, NonThresholdReport>;

ThresholdResult extract_threshold(const ActionTable& actions, double tol = 1e-6);

// Exact forward propagation of a per-state action rule through the tree.
struct Flow {
  std::vector<double> P;  // by node id, r = 0..R
  double objective = 0.0;
  double survival = 0.0;
  double quality = 0.0;  // sum_s (w(s) - (1 - delta0)) P(R,s)
};

Flow propagate(const TreeMeta& tree, const std::function<double(int, int)>& action);

// Survival within tol of L/K and the quality row's sign within tol.
bool flow_feasible(const TreeMeta& tree, const Flow& flow, double tol = 1e-8);

struct RepairOutcome {
  ThresholdPolicy policy;
  double objective = 0.0;  // of the propagated policy
  int candidates = 0;      // restricted LPs solved
  bool repaired = false;   // false when the LP point was already threshold-shaped
};

// Finds a threshold policy whose exact propagation is feasible within 1e-8
// and costs at most f* (1 + tol). Throws RepairFailure when the search runs
// out of candidates.
RepairOutcome threshold_repair(const LpSolution& sol, const LpProblem& problem, double tol = 1e-6);

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  ThresholdPolicy policy;
  long evaluated = 0;
};

// Exhaustive search over monotone threshold sequences with fractional
// actions on a grid of the given step. The root action is set by the
// survival mass and the last round's fraction is optimized exactly; the
// rounds in between use the grid. R <= 6.
OracleResult oracle_threshold_search(const LpInstance& inst, double frac_step);

}  // namespace lp2s
