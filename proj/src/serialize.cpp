#include "lp2s/serialize.hpp"

#include <ostream>

#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s {

using nlohmann::json;

std::string format_real(double x) { return fmt::format("{}", x == 0.0 ? 0.0 : x); }

namespace {

std::string var_name(const LpProblem& p, int v) {
  if (!p.tree) return fmt::format("x{}", v);
  const auto [idx, kind] = p.tree->map.inverse(v);
  return fmt::format("{}({},{})", to_string(kind), idx.r, idx.s);
}

RowSense parse_sense(const std::string& s) {
  if (s == "eq") return RowSense::Eq;
  if (s == "le") return RowSense::Le;
  if (s == "ge") return RowSense::Ge;
  throw InvalidArgument(fmt::format("unknown row sense '{}'", s));
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

}  // namespace

json to_json(const LpProblem& problem) {
  json vars = json::array();
  for (int v = 0; v < problem.num_vars; ++v) vars.push_back(var_name(problem, v));
  json obj = json::object();
  obj["cols"] = problem.obj_cols;
  obj["vals"] = problem.obj_vals;
  obj["sense"] = "min";
  json rows = json::array();
  for (const auto& r : problem.rows) {
    json row = {{"cols", r.cols}, {"vals", r.vals}, {"sense", to_string(r.sense)}, {"rhs", r.rhs},
                {"kind", to_string(r.kind)}};
    if (r.node.r >= 0) row["node"] = {r.node.r, r.node.s};
    rows.push_back(std::move(row));
  }
  return {{"schema_version", 1}, {"num_vars", problem.num_vars}, {"variables", vars}, {"objective", obj},
          {"rows", rows}, {"bounds", "x >= 0"}};
}

LpProblem lp_problem_from_json(const json& j) {
  LpProblem p;
  p.num_vars = j.at("num_vars").get<int>();
  p.obj_cols = j.at("objective").at("cols").get<std::vector<int>>();
  p.obj_vals = j.at("objective").at("vals").get<std::vector<double>>();
  for (const auto& r : j.at("rows")) {
    LpRow row;
    row.cols = r.at("cols").get<std::vector<int>>();
    row.vals = r.at("vals").get<std::vector<double>>();
    row.sense = parse_sense(r.at("sense").get<std::string>());
    row.rhs = r.at("rhs").get<double>();
    p.rows.push_back(std::move(row));
  }
  p.check_well_formed();
  return p;
}

json to_json(const LpSolution& solution, const LpProblem& problem) {
  json out = {{"schema_version", 1},
              {"status", to_string(solution.status)},
              {"objective", solution.objective},
              {"iterations", solution.iterations},
              {"max_eq_residual", solution.max_eq_residual},
              {"max_ineq_violation", solution.max_ineq_violation},
              {"optimality_gap", solution.optimality_gap},
              {"max_dual_infeasibility", solution.max_dual_infeasibility}};
  if (solution.status == SolveStatus::Optimal) {
    json vars = json::object();
    for (int v = 0; v < problem.num_vars && v < static_cast<int>(solution.values.size()); ++v) {
      vars[var_name(problem, v)] = solution.values[v];
    }
    out["values"] = solution.values;
    out["named_values"] = std::move(vars);
  } else {
    out["infeasibility_reason"] = solution.infeasibility_reason;
    out["violated_rows"] = solution.violated_rows;
  }
  return out;
}

json to_json(const ActionTable& table) {
  json states = json::array();
  for (int r = 0; r < table.R; ++r) {
    for (int s = 0; s <= r; ++s) {
      states.push_back({{"r", r}, {"s", s}, {"action", table.action(r, s)}, {"reach", table.reach_at(r, s)}});
    }
  }
  return {{"schema_version", 1}, {"R", table.R}, {"eps_reach", table.eps_reach}, {"states", states}};
}

json to_json(const ThresholdPolicy& policy) {
  return {{"schema_version", 1}, {"s_star", policy.s_star}, {"frac", policy.frac}};
}

void write_actions_csv(std::ostream& out, const ActionTable& table) {
  out << "r,s,action,reach\n";
  for (int r = 0; r < table.R; ++r) {
    for (int s = 0; s <= r; ++s) {
      out << r << ',' << s << ',' << format_real(table.action(r, s)) << ',' << format_real(table.reach_at(r, s))
          << '\n';
    }
  }
}

void write_thresholds_csv(std::ostream& out, const ThresholdPolicy& policy) {
  out << "r,s_star,frac\n";
  for (int r = 0; r < policy.rounds(); ++r) {
    out << r << ',' << policy.s_star[r] << ',' << format_real(policy.frac[r]) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<MetricsSummary>& rows,
                       const std::vector<BoundReport>& bounds) {
  out << "policy,N,mean_SR,se_SR,mean_PB,se_PB,mean_T,bound,observed,satisfied,slack\n";
  for (const auto& m : rows) {
    out << m.policy << ',' << m.episodes << ',' << format_real(m.mean_sr) << ',' << opt_real(m.se_sr) << ','
        << format_real(m.mean_pb) << ',' << opt_real(m.se_pb) << ',' << format_real(m.mean_t) << ",,,,\n";
  }
  for (const auto& b : bounds) {
    out << "bound:" << b.name << ",,,,,,," << format_real(b.bound) << ',' << opt_real(b.observed) << ','
        << (b.observed ? (b.satisfied ? "true" : "false") : "") << ',' << (b.observed ? format_real(b.slack) : "")
        << '\n';
  }
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundReport>& bounds) {
  out << "name,bound,observed,satisfied,slack\n";
  for (const auto& b : bounds) {
    out << b.name << ',' << format_real(b.bound) << ',' << opt_real(b.observed) << ','
        << (b.observed ? (b.satisfied ? "true" : "false") : "") << ',' << (b.observed ? format_real(b.slack) : "")
        << '\n';
  }
}

}  // namespace lp2s
