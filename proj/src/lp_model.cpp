#include "lp2s/lp_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "lp2s/errors.hpp"
#include "lp2s/simplex.hpp"

namespace lp2s {

Direction natural_direction(Variant v) { return v == Variant::Srm ? Direction::Leq : Direction::Geq; }

LpInstance LpInstance::make(Variant variant, PriorSpec prior, int K, int R, double L, double delta0,
                            std::optional<double> mu0) {
  WeightSpec w = variant == Variant::Pac ? WeightSpec::pac(mu0.value_or(-1.0), R)
               : variant == Variant::Srm ? WeightSpec::srm(K, R)
                                         : WeightSpec::fc(K, R);
  LpInstance inst{w, std::move(prior), K, R, L, delta0, natural_direction(variant)};
  inst.validate();
  return inst;
}

void LpInstance::validate() const {
  weight.validate();
  if (K < 1) throw InvalidArgument("K must be >= 1");
  if (R < 1) throw InvalidArgument("R must be >= 1");
  if (weight.R != R) throw InvalidArgument("weight spec R differs from instance R");
  if (weight.K && *weight.K != K) throw InvalidArgument("weight spec K differs from instance K");
  if (!(L > 0.0) || L > K) throw InvalidArgument(fmt::format("need 0 < L <= K, got L={}", L));
  if (!(delta0 >= 0.0 && delta0 <= 1.0)) throw InvalidArgument("delta0 must lie in [0,1]");
  if (direction != natural_direction(weight.variant)) {
    throw InvalidArgument("constraint direction does not match the weight's monotonicity");
  }
}

LpInstance LpInstance::with_delta0(double d) const {
  LpInstance copy = *this;
  copy.delta0 = d;
  copy.validate();
  return copy;
}

std::string to_string(VarKind k) {
  switch (k) {
    case VarKind::P: return "P";
    case VarKind::P1: return "P1";
    case VarKind::P0: return "P0";
  }
  return "?";
}

IndexMap::IndexMap(int R) : R_(R) {
  if (R < 1) throw InvalidArgument("R must be >= 1");
}

int IndexMap::var_index(TreeIndex idx, VarKind kind) const {
  if (idx.r < 0 || idx.r > R_ || idx.s < 0 || idx.s > idx.r) {
    throw InvalidArgument(fmt::format("tree index ({}, {}) invalid for R={}", idx.r, idx.s, R_));
  }
  return 3 * node_id(idx) + static_cast<int>(kind);
}

std::pair<TreeIndex, VarKind> IndexMap::inverse(int var) const {
  if (var < 0 || var >= num_vars()) throw InvalidArgument(fmt::format("variable {} out of range", var));
  const int node = var / 3;
  int r = static_cast<int>((std::sqrt(8.0 * node + 1.0) - 1.0) / 2.0);
  while (r * (r + 1) / 2 > node) --r;
  while ((r + 1) * (r + 2) / 2 <= node) ++r;
  return {TreeIndex{r, node - r * (r + 1) / 2}, static_cast<VarKind>(var % 3)};
}

std::string to_string(RowSense s) {
  switch (s) {
    case RowSense::Eq: return "eq";
    case RowSense::Le: return "le";
    case RowSense::Ge: return "ge";
  }
  return "?";
}

std::string to_string(RowKind k) {
  switch (k) {
    case RowKind::Sum: return "sum";
    case RowKind::Coupling: return "coupling";
    case RowKind::Capacity: return "capacity";
    case RowKind::Boundary: return "boundary";
    case RowKind::Survival: return "survival";
    case RowKind::Quality: return "quality";
    case RowKind::Restriction: return "restriction";
    case RowKind::Generic: return "generic";
  }
  return "?";
}

std::size_t LpProblem::count(RowKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](const LpRow& r) { return r.kind == kind; }));
}

std::size_t LpProblem::count(RowSense sense) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](const LpRow& r) { return r.sense == sense; }));
}

void LpProblem::check_well_formed() const {
  if (obj_cols.size() != obj_vals.size()) throw InvalidArgument("objective size mismatch");
  for (int c : obj_cols) {
    if (c < 0 || c >= num_vars) throw InvalidArgument("objective column out of range");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.cols.size() != row.vals.size()) {
      throw InvalidArgument(fmt::format("row {} has mismatched cols/vals", i));
    }
    if (!(row.scale > 0.0)) throw InvalidArgument(fmt::format("row {} has non-positive scale", i));
    std::set<int> seen;
    for (int c : row.cols) {
      if (c < 0 || c >= num_vars) throw InvalidArgument(fmt::format("row {} column {} out of range", i, c));
      if (!seen.insert(c).second) throw InvalidArgument(fmt::format("row {} repeats column {}", i, c));
    }
  }
}

LpProblem build_lp(const LpInstance& inst) {
  inst.validate();
  const int R = inst.R;
  IndexMap map(R);
  auto var = [&](int r, int s, VarKind k) { return map.var_index({r, s}, k); };

  std::vector<double> q(map.num_nodes(), 0.0);
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) q[IndexMap::node_id({r, s})] = posterior_mean(inst.prior, r, s);
  }
  const auto w = weights(inst.weight, inst.prior);
  const double survival = inst.survival_mass();

  LpProblem lp;
  lp.num_vars = map.num_vars();

  for (int r = 1; r <= R; ++r) {
    for (int s = 0; s <= r; ++s) {
      lp.obj_cols.push_back(var(r, s, VarKind::P));
      lp.obj_vals.push_back(1.0);
    }
  }

  // (a) P = P1 + P0
  for (int r = 0; r <= R; ++r) {
    for (int s = 0; s <= r; ++s) {
      lp.rows.push_back({{var(r, s, VarKind::P), var(r, s, VarKind::P1), var(r, s, VarKind::P0)},
                         {1.0, -1.0, -1.0}, RowSense::Eq, 0.0, 1.0, RowKind::Sum, {r, s}});
    }
  }
  // (b) P1(r+1,s+1)/q = P0(r+1,s)/(1-q), written without division.
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) {
      const double qs = q[IndexMap::node_id({r, s})];
      lp.rows.push_back({{var(r + 1, s + 1, VarKind::P1), var(r + 1, s, VarKind::P0)},
                         {1.0 - qs, -qs}, RowSense::Eq, 0.0, 1.0, RowKind::Coupling, {r, s}});
    }
  }
  // (c) P1(r+1,s+1) <= q P(r,s)
  for (int r = 0; r < R; ++r) {
    for (int s = 0; s <= r; ++s) {
      const double qs = q[IndexMap::node_id({r, s})];
      lp.rows.push_back({{var(r + 1, s + 1, VarKind::P1), var(r, s, VarKind::P)},
                         {1.0, -qs}, RowSense::Le, 0.0, 1.0, RowKind::Capacity, {r, s}});
    }
  }
  // (d) boundary
  lp.rows.push_back({{var(0, 0, VarKind::P1)}, {1.0}, RowSense::Eq, 1.0, 1.0, RowKind::Boundary, {0, 0}});
  lp.rows.push_back({{var(0, 0, VarKind::P0)}, {1.0}, RowSense::Eq, 0.0, 1.0, RowKind::Boundary, {0, 0}});
  for (int r = 1; r <= R; ++r) {
    lp.rows.push_back({{var(r, 0, VarKind::P1)}, {1.0}, RowSense::Eq, 0.0, 1.0, RowKind::Boundary, {r, 0}});
  }
  for (int r = 1; r <= R; ++r) {
    lp.rows.push_back({{var(r, r, VarKind::P0)}, {1.0}, RowSense::Eq, 0.0, 1.0, RowKind::Boundary, {r, r}});
  }
  // (e) survival and (f) quality, scaled by K/L for the solver.
  const double scale = 1.0 / survival;
  LpRow surv{{}, {}, RowSense::Eq, survival, scale, RowKind::Survival, {R, -1}};
  LpRow qual{{}, {}, inst.direction == Direction::Geq ? RowSense::Ge : RowSense::Le, 0.0, scale,
             RowKind::Quality, {R, -1}};
  for (int s = 0; s <= R; ++s) {
    surv.cols.push_back(var(R, s, VarKind::P));
    surv.vals.push_back(1.0);
    qual.cols.push_back(var(R, s, VarKind::P));
    qual.vals.push_back(w[s] - (1.0 - inst.delta0));
  }
  lp.rows.push_back(std::move(surv));
  lp.rows.push_back(std::move(qual));

  lp.tree = TreeMeta{map, std::move(q), w, inst.direction, inst.delta0, survival};
  return lp;
}

std::optional<std::string> necessary_feasibility_check(const LpInstance& inst) {
  inst.validate();
  const auto w = weights(inst.weight, inst.prior);
  const double need = 1.0 - inst.delta0;
  if (inst.direction == Direction::Geq) {
    const double best = *std::max_element(w.begin(), w.end());
    if (best < need) {
      return fmt::format("w(R) < 1-delta0 ({:.6g} < {:.6g})", best, need);
    }
    // At the exact threshold only terminal states with w(s) = w(R) may hold
    // mass; with a strictly increasing w that is the all-success state.
    const bool only_top = std::abs(best - need) <= 1e-12 && inst.R >= 1 && w[inst.R - 1] < best;
    if (only_top && inst.survival_mass() > prior_moment(inst.prior, inst.R)) {
      return fmt::format("pure-success mass insufficient (L/K = {:.6g} > E[mu^R] = {:.6g})",
                         inst.survival_mass(), prior_moment(inst.prior, inst.R));
    }
    return std::nullopt;
  }
  const double best = *std::min_element(w.begin(), w.end());
  if (best > need) return fmt::format("w(R) > 1-delta0 ({:.6g} > {:.6g})", best, need);
  return std::nullopt;
}

namespace {

bool feasible_at(const LpInstance& inst, double d) {
  const auto probe = inst.with_delta0(d);
  if (necessary_feasibility_check(probe)) return false;
  return lp_feasible(build_lp(probe));
}

}  // namespace

double min_feasible_delta0(const LpInstance& inst, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (inst.direction != Direction::Geq) {
    throw InvalidArgument("min_feasible_delta0 applies to GEQ-direction variants");
  }
  if (!feasible_at(inst, 1.0)) {
    throw InfeasibleInstanceError("LP infeasible even at delta0 = 1 (survival row unsatisfiable)");
  }
  if (feasible_at(inst, 0.0)) return 0.0;
  double lo = 0.0;  // infeasible
  double hi = 1.0;  // feasible
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible_at(inst, mid) ? hi : lo) = mid;
  }
  return hi;
}

double tightest_feasible_delta0(const LpInstance& inst, double tol) {
  if (inst.direction == Direction::Geq) return min_feasible_delta0(inst, tol);
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (!feasible_at(inst, 0.0)) {
    throw InfeasibleInstanceError("LP infeasible even at delta0 = 0 (survival row unsatisfiable)");
  }
  if (feasible_at(inst, 1.0)) return 1.0;
  double lo = 0.0;  // feasible
  double hi = 1.0;  // infeasible
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible_at(inst, mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace lp2s
