#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "lp2s/errors.hpp"
#include "lp2s/lp_solve.hpp"

namespace lp2s {

namespace {

const TreeMeta& tree_of(const LpProblem& problem) {
  if (!problem.tree) throw InvalidArgument("problem carries no tree metadata (not built by build_lp)");
  return *problem.tree;
}

struct ActionForms {
  std::optional<double> success;  // P1(r+1,s+1) / (q P(r,s))
  std::optional<double> failure;  // P0(r+1,s) / ((1-q) P(r,s))
};

ActionForms action_forms(const std::vector<double>& x, const TreeMeta& tree, int r, int s) {
  const auto& map = tree.map;
  const double p = x[map.var_index({r, s}, VarKind::P)];
  const double q = tree.q[IndexMap::node_id({r, s})];
  ActionForms f;
  if (q > 0.0) f.success = x[map.var_index({r + 1, s + 1}, VarKind::P1)] / (q * p);
  if (q < 1.0) f.failure = x[map.var_index({r + 1, s}, VarKind::P0)] / ((1.0 - q) * p);
  return f;
}

struct Interval {
  int lo;
  int hi;
  double frac;
};

// Range of thresholds consistent with round r's reachable actions, or the
// reachable states that break the shape.
std::variant<Interval, std::vector<NonThresholdReport::Entry>> round_interval(const ActionTable& t, int r,
                                                                              double tol) {
  std::vector<int> live;
  for (int s = 0; s <= r; ++s) {
    if (t.reachable(r, s)) live.push_back(s);
  }
  int first = -1;
  for (int s : live) {
    if (t.action(r, s) > tol) {
      first = s;
      break;
    }
  }
  if (first < 0) {
    const int top = live.empty() ? -1 : live.back();
    return Interval{std::min(top + 1, r), r, 0.0};
  }
  std::vector<NonThresholdReport::Entry> bad;
  for (int s : live) {
    if (s > first && t.action(r, s) < 1.0 - tol) bad.push_back({r, s, t.action(r, s), t.reach_at(r, s)});
  }
  if (!bad.empty()) {
    bad.insert(bad.begin(), {r, first, t.action(r, first), t.reach_at(r, first)});
    return bad;
  }
  const double a = t.action(r, first);
  if (a < 1.0 - tol) return Interval{first, first, a};
  int zero = -1;
  for (int s : live) {
    if (s < first) zero = s;
  }
  return Interval{zero + 1, first, 1.0};
}

}  // namespace

double reach_epsilon(double survival) { return 1e-10 * survival; }

double ActionTable::action(int r, int s) const {
  if (r < 0 || r >= R || s < 0 || s > r) throw InvalidArgument(fmt::format("no action at ({}, {})", r, s));
  return a[IndexMap::node_id({r, s})];
}

double ActionTable::reach_at(int r, int s) const {
  if (r < 0 || r >= R || s < 0 || s > r) throw InvalidArgument(fmt::format("no state ({}, {})", r, s));
  return reach[IndexMap::node_id({r, s})];
}

ActionTable extract_actions(const LpSolution& sol, const LpProblem& problem) {
  if (sol.status != SolveStatus::Optimal) throw InvalidArgument("actions need an optimal solution");
  const auto& tree = tree_of(problem);
  const int R = tree.map.rounds();
  ActionTable t;
  t.R = R;
  t.eps_reach = reach_epsilon(tree.survival);
  const int n = R * (R + 1) / 2;
  t.a.assign(n, 0.0);
  t.reach.assign(n, 0.0);
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) {
      const int id = IndexMap::node_id({r, s});
      const double p = sol.values[tree.map.var_index({r, s}, VarKind::P)];
      t.reach[id] = p;
      if (p <= t.eps_reach) continue;
      const auto f = action_forms(sol.values, tree, r, s);
      double a = 0.0;
      if (f.success && f.failure) {
        if (std::abs(*f.success - *f.failure) > 1e-4) {
          throw ExtractionInconsistency(fmt::format(
              "action forms disagree at ({}, {}): {:.9g} vs {:.9g}", r, s, *f.success, *f.failure));
        }
        a = tree.q[id] >= 0.5 ? *f.success : *f.failure;
      } else if (f.success) {
        a = *f.success;
      } else if (f.failure) {
        a = *f.failure;
      }
      t.a[id] = std::clamp(a, 0.0, 1.0);
    }
  }
  return t;
}

double action_form_disagreement(const LpSolution& sol, const LpProblem& problem) {
  const auto& tree = tree_of(problem);
  const int R = tree.map.rounds();
  const double eps = reach_epsilon(tree.survival);
  double worst = 0.0;
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) {
      if (sol.values[tree.map.var_index({r, s}, VarKind::P)] <= eps) continue;
      const auto f = action_forms(sol.values, tree, r, s);
      if (f.success && f.failure) worst = std::max(worst, std::abs(*f.success - *f.failure));
    }
  }
  return worst;
}

double ThresholdPolicy::action(int r, int s) const {
  if (r < 0 || r >= rounds() || s < 0 || s > r) {
    throw InvalidArgument(fmt::format("no action at ({}, {})", r, s));
  }
  if (s < s_star[r]) return 0.0;
  if (s == s_star[r]) return frac[r];
  return 1.0;
}

ThresholdResult extract_threshold(const ActionTable& actions, double tol) {
  const int R = actions.R;
  std::vector<Interval> iv;
  NonThresholdReport report;
  for (int r = 0; r < R; ++r) {
    auto res = round_interval(actions, r, tol);
    if (auto* bad = std::get_if<std::vector<NonThresholdReport::Entry>>(&res)) {
      report.offenders.insert(report.offenders.end(), bad->begin(), bad->end());
    } else {
      iv.push_back(std::get<Interval>(res));
    }
  }
  if (!report.offenders.empty()) {
    report.reason = "reachable actions are not 0-then-1 with a single intermediate value";
    return report;
  }
  // Largest non-decreasing choice, filled from the last round backwards.
  ThresholdPolicy pol;
  pol.s_star.assign(R, 0);
  pol.frac.assign(R, 0.0);
  int cap = std::numeric_limits<int>::max();
  for (int r = R - 1; r >= 0; --r) {
    const int pick = std::min(iv[r].hi, cap);
    if (pick < iv[r].lo) {
      report.reason = fmt::format("thresholds cannot be non-decreasing: round {} needs >= {} but round {} allows <= {}",
                                  r, iv[r].lo, r + 1, cap);
      for (int s = 0; s <= r; ++s) {
        if (actions.reachable(r, s)) report.offenders.push_back({r, s, actions.action(r, s), actions.reach_at(r, s)});
      }
      return report;
    }
    pol.s_star[r] = pick;
    pol.frac[r] = iv[r].frac;
    cap = pick;
  }
  return pol;
}

Flow propagate(const TreeMeta& tree, const std::function<double(int, int)>& action) {
  const int R = tree.map.rounds();
  Flow f;
  f.P.assign(tree.map.num_nodes(), 0.0);
  f.P[0] = 1.0;
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) {
      const int id = IndexMap::node_id({r, s});
      const double pulled = f.P[id] * action(r, s);
      if (pulled == 0.0) continue;
      const double q = tree.q[id];
      f.P[IndexMap::node_id({r + 1, s + 1})] += pulled * q;
      f.P[IndexMap::node_id({r + 1, s})] += pulled * (1.0 - q);
    }
  }
  for (int r = 1; r <= R; ++r) {
    for (int s = 0; s <= r; ++s) f.objective += f.P[IndexMap::node_id({r, s})];
  }
  for (int s = 0; s <= R; ++s) {
    const double p = f.P[IndexMap::node_id({R, s})];
    f.survival += p;
    f.quality += (tree.terminal[s] - (1.0 - tree.delta0)) * p;
  }
  return f;
}

bool flow_feasible(const TreeMeta& tree, const Flow& flow, double tol) {
  if (std::abs(flow.survival - tree.survival) > tol) return false;
  return tree.direction == Direction::Geq ? flow.quality >= -tol : flow.quality <= tol;
}

namespace {

class Repairer {
 public:
  Repairer(const LpProblem& problem, double f_star, double tol)
      : problem_(problem), tree_(*problem.tree), f_star_(f_star), tol_(tol) {
    const int R = tree_.map.rounds();
    capacity_row_.assign(R * (R + 1) / 2, -1);
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
      const auto& row = problem.rows[i];
      if (row.kind == RowKind::Capacity) capacity_row_[IndexMap::node_id(row.node)] = static_cast<int>(i);
    }
  }

  struct Eval {
    bool feasible = false;
    double lp_objective = std::numeric_limits<double>::infinity();
    std::optional<ThresholdPolicy> accepted;
    double objective = 0.0;
  };

  Eval evaluate(const std::vector<int>& s_star) {
    ++solved_;
    Eval e;
    LpProblem lp = problem_;
    const int R = tree_.map.rounds();
    for (int r = 0; r < R; ++r) {
      for (int s = 0; s <= r; ++s) {
        if (s < s_star[r]) {
          lp.rows.push_back({{tree_.map.var_index({r + 1, s + 1}, VarKind::P1)}, {1.0}, RowSense::Eq, 0.0, 1.0,
                             RowKind::Restriction, {r, s}});
        } else if (s > s_star[r]) {
          lp.rows[capacity_row_[IndexMap::node_id({r, s})]].sense = RowSense::Eq;
        }
      }
    }
    LpSolution sol;
    try {
      sol = solve_lp(lp);
    } catch (const SolverFailure&) {
      return e;
    }
    if (sol.status != SolveStatus::Optimal) return e;
    e.feasible = true;
    e.lp_objective = sol.objective;
    ThresholdPolicy pol;
    pol.s_star = s_star;
    pol.frac.assign(R, 0.0);
    for (int r = 0; r < R; ++r) {
      const double p = sol.values[tree_.map.var_index({r, s_star[r]}, VarKind::P)];
      if (p <= reach_epsilon(tree_.survival)) continue;
      const auto id = IndexMap::node_id({r, s_star[r]});
      const double q = tree_.q[id];
      const double a = q >= 0.5 ? sol.values[tree_.map.var_index({r + 1, s_star[r] + 1}, VarKind::P1)] / (q * p)
                                : sol.values[tree_.map.var_index({r + 1, s_star[r]}, VarKind::P0)] / ((1.0 - q) * p);
      pol.frac[r] = std::clamp(a, 0.0, 1.0);
    }
    if (auto obj = verify(pol)) {
      e.accepted = pol;
      e.objective = *obj;
    }
    return e;
  }

  std::optional<double> verify(const ThresholdPolicy& pol) const {
    const Flow f = propagate(tree_, [&](int r, int s) { return pol.action(r, s); });
    if (!flow_feasible(tree_, f, 1e-8)) return std::nullopt;
    if (f.objective > f_star_ * (1.0 + tol_)) return std::nullopt;
    return f.objective;
  }

  int solved() const { return solved_; }

 private:
  const LpProblem& problem_;
  const TreeMeta& tree_;
  double f_star_;
  double tol_;
  std::vector<int> capacity_row_;
  int solved_ = 0;
};

// Round r's threshold from the pulled mass: the smallest s* such that pulling
// every state above it carries no more than the LP's pulled mass.
int mass_matched_threshold(const ActionTable& t, int r) {
  double pulled = 0.0;
  for (int s = 0; s <= r; ++s) pulled += t.reach_at(r, s) * t.action(r, s);
  double above = 0.0;
  for (int s = r; s >= 0; --s) {
    above += t.reach_at(r, s);
    if (above >= pulled - 1e-15) return s;
  }
  return 0;
}

void make_monotone(std::vector<int>& v, int pinned) {
  for (int r = pinned + 1; r < static_cast<int>(v.size()); ++r) v[r] = std::max(v[r], v[r - 1]);
  for (int r = pinned - 1; r >= 0; --r) v[r] = std::min(v[r], v[r + 1]);
  for (int r = 0; r < static_cast<int>(v.size()); ++r) v[r] = std::clamp(v[r], 0, r);
}

}  // namespace

RepairOutcome threshold_repair(const LpSolution& sol, const LpProblem& problem, double tol) {
  const auto& tree = tree_of(problem);
  const int R = tree.map.rounds();
  const ActionTable actions = extract_actions(sol, problem);
  Repairer rep(problem, sol.objective, tol);

  const auto direct = extract_threshold(actions);
  if (const auto* pol = std::get_if<ThresholdPolicy>(&direct)) {
    if (auto obj = rep.verify(*pol)) return {*pol, *obj, 0, false};
  }

  std::vector<int> seed(R, 0);
  for (int r = 0; r < R; ++r) {
    const auto res = round_interval(actions, r, 1e-6);
    if (const auto* iv = std::get_if<Interval>(&res)) {
      seed[r] = iv->hi;
    } else {
      seed[r] = mass_matched_threshold(actions, r);
    }
  }
  make_monotone(seed, 0);

  std::set<std::vector<int>> seen{seed};
  auto current = seed;
  auto cur_eval = rep.evaluate(current);
  if (cur_eval.accepted) return {*cur_eval.accepted, cur_eval.objective, rep.solved(), true};
  const int budget = 40 * R + 200;
  bool moved = true;
  while (moved && rep.solved() < budget) {
    moved = false;
    for (int r = 1; r < R && !moved; ++r) {
      for (int d : {-1, 1}) {
        auto cand = current;
        cand[r] += d;
        make_monotone(cand, r);
        if (!seen.insert(cand).second) continue;
        const auto e = rep.evaluate(cand);
        if (e.accepted) return {*e.accepted, e.objective, rep.solved(), true};
        if (e.lp_objective < cur_eval.lp_objective - 1e-12) {
          current = cand;
          cur_eval = e;
          moved = true;
          break;
        }
        if (rep.solved() >= budget) break;
      }
    }
  }
  throw RepairFailure(fmt::format("no threshold policy within {:.1e} of f* = {:.12g} after {} restricted solves",
                                  tol, sol.objective, rep.solved()));
}

}  // namespace lp2s
