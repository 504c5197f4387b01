#pragma once
// The peer-independent linear program over the binomial state tree.
//
// Node (r, s), 0 <= s <= r <= R, carries three variables: P(r,s), the
// probability that the focal arm is pulled in round r and has s successes so
// far, and its split P1/P0 by the round-r reward. The objective is the
// expected number of stage-1 pulls of one arm.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lp2s/prior.hpp"

namespace lp2s {

// GEQ for weights non-decreasing in s (PAC, FC), LEQ for non-increasing (SRM).
enum class Direction { Geq, Leq };

Direction natural_direction(Variant v);

struct LpInstance {
  WeightSpec weight;
  PriorSpec prior;
  int K;
  int R;
  double L;
  double delta0;
  Direction direction;

  // Builds the weight spec from the variant and checks every invariant.
  static LpInstance make(Variant variant, PriorSpec prior, int K, int R, double L, double delta0,
                         std::optional<double> mu0 = std::nullopt);
  void validate() const;
  double survival_mass() const { return L / K; }
  LpInstance with_delta0(double d) const;
};

struct TreeIndex {
  int r;
  int s;
  bool operator==(const TreeIndex&) const = default;
};

enum class VarKind { P = 0, P1 = 1, P0 = 2 };

std::string to_string(VarKind k);

class IndexMap {
 public:
  explicit IndexMap(int R);

  int rounds() const { return R_; }
  int num_nodes() const { return (R_ + 1) * (R_ + 2) / 2; }
  int num_vars() const { return 3 * num_nodes(); }
  static int node_id(TreeIndex idx) { return idx.r * (idx.r + 1) / 2 + idx.s; }

  int var_index(TreeIndex idx, VarKind kind) const;
  std::pair<TreeIndex, VarKind> inverse(int var) const;

 private:
  int R_;
};

enum class RowSense { Eq, Le, Ge };
enum class RowKind { Sum, Coupling, Capacity, Boundary, Survival, Quality, Restriction, Generic };

std::string to_string(RowSense s);
std::string to_string(RowKind k);

struct LpRow {
  std::vector<int> cols;
  std::vector<double> vals;
  RowSense sense = RowSense::Eq;
  double rhs = 0.0;
  // Multiplier applied by the solver before pivoting; residuals are
  // reported on the unscaled row.
  double scale = 1.0;
  RowKind kind = RowKind::Generic;
  TreeIndex node{-1, -1};
};

// Tree data carried alongside an assembled LP-ind problem.
struct TreeMeta {
  IndexMap map;
  std::vector<double> q;         // posterior mean per node id, r < R
  std::vector<double> terminal;  // w(0..R)
  Direction direction;
  double delta0;
  double survival;  // L / K
};

struct LpProblem {
  int num_vars = 0;
  std::vector<int> obj_cols;
  std::vector<double> obj_vals;
  std::vector<LpRow> rows;
  std::optional<TreeMeta> tree;

  std::size_t count(RowKind kind) const;
  std::size_t count(RowSense sense) const;
  // Throws InvalidArgument on bad column indices or duplicate columns in a row.
  void check_well_formed() const;
};

LpProblem build_lp(const LpInstance& inst);

// Necessary (not sufficient) feasibility conditions derived from the
// terminal weights. Empty optional means the check passed.
std::optional<std::string> necessary_feasibility_check(const LpInstance& inst);

// Smallest delta0 in [0,1] at which the GEQ-direction LP is feasible, by
// bisection to within tol. Throws InfeasibleInstanceError when infeasible at 1.
double min_feasible_delta0(const LpInstance& inst, double tol);

// The tightest feasible quality level for either direction: the smallest
// delta0 for GEQ, the largest for LEQ (where a larger delta0 is stricter).
double tightest_feasible_delta0(const LpInstance& inst, double tol);

}  // namespace lp2s
