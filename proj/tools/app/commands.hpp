#pragma once
// Subcommands of the lp2s tool. Each returns a process exit code.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "app/config.hpp"
#include "lp2s/lp_solve.hpp"
#include "lp2s/policy.hpp"
#include "lp2s/sim.hpp"

namespace lp2s::app {

enum ExitCode : int { kOk = 0, kConfigError = 1, kInfeasible = 2 };

struct SolvedInstance {
  LpInstance instance;
  LpProblem problem;
  LpSolution solution;
  ActionTable actions;
  ThresholdPolicy threshold;
  bool repaired = false;
  int repair_candidates = 0;
  double threshold_objective = 0.0;
};

// build -> precheck -> solve -> extract -> threshold, repairing when the
// optimum is not threshold-shaped. Throws InfeasibleInstanceError on an
// infeasible instance.
SolvedInstance solve_pipeline(const LpInstance& inst);

// Factory for one configured policy. lp2s needs a solved instance.
PolicyFactory policy_factory(const PolicyConfig& p, const ExperimentConfig& cfg, const SolvedInstance* solved);

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log);
int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_compare(const ExperimentConfig& cfg, std::ostream& log);
int cmd_bounds(const ExperimentConfig& cfg, std::ostream& log);
int cmd_min_delta0(const ExperimentConfig& cfg, std::ostream& log);

// Maps library exceptions to exit codes, writing the message to err.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace lp2s::app
