#pragma once
// JSON and CSV writers for LP problems, solutions, action tables and run summaries.
// Schemas are described in docs/formats.md.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lp2s/bounds.hpp"
#include "lp2s/lp_solve.hpp"
#include "lp2s/sim.hpp"

namespace lp2s {

nlohmann::json to_json(const LpProblem& problem);
nlohmann::json to_json(const LpSolution& solution, const LpProblem& problem);
nlohmann::json to_json(const ActionTable& table);
nlohmann::json to_json(const ThresholdPolicy& policy);

// Rebuilds the generic part of an LpProblem (no tree metadata).
LpProblem lp_problem_from_json(const nlohmann::json& j);

// Columns r,s,action,reach over every node with r < R.
void write_actions_csv(std::ostream& out, const ActionTable& table);
// Columns r,s_star,frac.
void write_thresholds_csv(std::ostream& out, const ThresholdPolicy& policy);

// Columns policy,N,mean_SR,se_SR,mean_PB,se_PB,mean_T,bound,observed,satisfied,slack.
// Bound reports follow the policy rows with a "bound:" name prefix.
void write_summary_csv(std::ostream& out, const std::vector<MetricsSummary>& rows,
                       const std::vector<BoundReport>& bounds = {});

void write_bounds_csv(std::ostream& out, const std::vector<BoundReport>& bounds);

// Shortest decimal that round-trips, "." separator.
std::string format_real(double x);

}  // namespace lp2s
