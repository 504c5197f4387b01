#include "lp2s/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s {

std::string to_string(SolveStatus s) { return s == SolveStatus::Optimal ? "Optimal" : "Infeasible"; }

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vec = Eigen::VectorXd;
constexpr double kInf = std::numeric_limits<double>::infinity();

// B = B0 E1 ... Ek, each E an identity with one column replaced.
class BasisFactor {
 public:
  void factor(const SpMat& B) {
    etas_.clear();
    lu_.analyzePattern(B);
    lu_.factorize(B);
    if (lu_.info() != Eigen::Success) {
      throw SolverFailure("basis factorization failed (singular basis): " + lu_.lastErrorMessage());
    }
  }

  Vec ftran(const Vec& v) const {
    Vec x = lu_.solve(v);
    for (const auto& e : etas_) {
      const double xp = x[e.pos] / e.col[e.pos];
      x.noalias() -= xp * e.col;
      x[e.pos] = xp;
    }
    return x;
  }

  Vec btran(Vec v) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const double dot = it->col.dot(v) - it->col[it->pos] * v[it->pos];
      v[it->pos] = (v[it->pos] - dot) / it->col[it->pos];
    }
    return lu_.transpose().solve(v);
  }

  void push(int pos, Vec col) { etas_.push_back({pos, std::move(col)}); }
  std::size_t size() const { return etas_.size(); }

 private:
  struct Eta {
    int pos;
    Vec col;
  };
  mutable Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;  // transpose() is non-const
  std::vector<Eta> etas_;
};

enum class ColType { Structural, Slack, Artificial };

class Simplex {
 public:
  // origin maps each row of lp to the caller's row numbering.
  Simplex(const LpProblem& lp, std::vector<int> origin, const SolverOptions& opt)
      : lp_(lp), origin_(std::move(origin)), opt_(opt) {
    setup();
  }

  LpSolution run() {
    LpSolution sol;
    // Phase 1
    std::vector<double> phase1_cost(ncols_, 0.0);
    for (int j = 0; j < ncols_; ++j) {
      if (type_[j] == ColType::Artificial) phase1_cost[j] = 1.0;
    }
    iterate(phase1_cost);
    refactor();
    double infeas = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (type_[basis_[i]] == ColType::Artificial) infeas += std::max(0.0, xb_[i]);
    }
    if (infeas > opt_.phase1_tol) {
      sol.status = SolveStatus::Infeasible;
      sol.iterations = iterations_;
      for (int i = 0; i < m_; ++i) {
        if (type_[basis_[i]] == ColType::Artificial && xb_[i] > opt_.phase1_tol) {
          sol.violated_rows.push_back(art_row_[basis_[i]]);
        }
      }
      for (int& r : sol.violated_rows) r = origin_[r];
      std::sort(sol.violated_rows.begin(), sol.violated_rows.end());
      sol.infeasibility_reason = fmt::format("phase-1 infeasibility {:.3e}", infeas);
      return sol;
    }
    if (opt_.phase1_only) {
      sol.status = SolveStatus::Optimal;
      sol.iterations = iterations_;
      sol.values = structural_values();
      return sol;
    }

    for (int j = 0; j < ncols_; ++j) {
      if (type_[j] == ColType::Artificial) upper_[j] = 0.0;
    }
    drive_out_artificials();
    iterate(cost_);
    refactor();
    return finish();
  }

 private:
  void setup() {
    m_ = static_cast<int>(lp_.rows.size());
    n_ = lp_.num_vars;
    b_.resize(m_);

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<int> row_sign(m_);
    int next = n_;
    std::vector<int> slack_of(m_, -1);
    std::vector<double> slack_coef(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[i];
      const double sc = row.scale;
      row_sign[i] = row.rhs * sc < 0.0 ? -1 : 1;
      const double f = sc * row_sign[i];
      b_[i] = row.rhs * f;
      for (std::size_t k = 0; k < row.cols.size(); ++k) {
        if (row.vals[k] != 0.0) trip.emplace_back(i, row.cols[k], row.vals[k] * f);
      }
      if (row.sense != RowSense::Eq) {
        slack_of[i] = next++;
        slack_coef[i] = (row.sense == RowSense::Le ? 1.0 : -1.0) * row_sign[i];
        trip.emplace_back(i, slack_of[i], slack_coef[i]);
      }
    }
    basis_.assign(m_, -1);
    std::vector<int> art_rows;
    for (int i = 0; i < m_; ++i) {
      if (slack_of[i] >= 0 && slack_coef[i] > 0.0) {
        basis_[i] = slack_of[i];
      } else {
        art_rows.push_back(i);
      }
    }
    const int first_art = next;
    for (int i : art_rows) {
      basis_[i] = next;
      trip.emplace_back(i, next, 1.0);
      ++next;
    }
    ncols_ = next;
    A_.resize(m_, ncols_);
    A_.setFromTriplets(trip.begin(), trip.end());
    A_.makeCompressed();

    type_.assign(ncols_, ColType::Structural);
    art_row_.assign(ncols_, -1);
    for (int i = 0; i < m_; ++i) {
      if (slack_of[i] >= 0) type_[slack_of[i]] = ColType::Slack;
    }
    for (std::size_t k = 0; k < art_rows.size(); ++k) {
      type_[first_art + static_cast<int>(k)] = ColType::Artificial;
      art_row_[first_art + static_cast<int>(k)] = art_rows[k];
    }
    upper_.assign(ncols_, kInf);
    cost_.assign(ncols_, 0.0);
    for (std::size_t k = 0; k < lp_.obj_cols.size(); ++k) cost_[lp_.obj_cols[k]] += lp_.obj_vals[k];
    pos_.assign(ncols_, -1);
    for (int i = 0; i < m_; ++i) pos_[basis_[i]] = i;
    refactor();
  }

  void refactor() {
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < m_; ++k) {
      for (SpMat::InnerIterator it(A_, basis_[k]); it; ++it) trip.emplace_back(it.row(), k, it.value());
    }
    SpMat B(m_, m_);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    factor_.factor(B);
    xb_ = factor_.ftran(b_);
  }

  Vec column(int j) const {
    Vec a = Vec::Zero(m_);
    for (SpMat::InnerIterator it(A_, j); it; ++it) a[it.row()] = it.value();
    return a;
  }

  Vec duals(const std::vector<double>& cost) const {
    Vec cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
    return factor_.btran(cb);
  }

  double reduced_cost(const std::vector<double>& cost, const Vec& y, int j) const {
    double d = cost[j];
    for (SpMat::InnerIterator it(A_, j); it; ++it) d -= it.value() * y[it.row()];
    return d;
  }

  // Returns the entering column or -1 when no reduced cost is below -tol.
  int price(const std::vector<double>& cost, const Vec& y, bool bland) const {
    int best = -1;
    double best_d = -opt_.optimality_tol;
    for (int j = 0; j < ncols_; ++j) {
      if (pos_[j] >= 0 || upper_[j] <= 0.0) continue;
      const double d = reduced_cost(cost, y, j);
      if (d < best_d) {
        best = j;
        best_d = d;
        if (bland) break;
      }
    }
    return best;
  }

  // Harris two-pass ratio test; -1 means unbounded.
  int ratio_test(const Vec& alpha, bool bland, double& theta) const {
    double theta_max = kInf;
    for (int i = 0; i < m_; ++i) {
      const double a = alpha[i];
      if (a > opt_.pivot_tol) {
        theta_max = std::min(theta_max, (std::max(0.0, xb_[i]) + opt_.feasibility_tol) / a);
      } else if (a < -opt_.pivot_tol && upper_[basis_[i]] < kInf) {
        theta_max = std::min(theta_max, (std::max(0.0, upper_[basis_[i]] - xb_[i]) + opt_.feasibility_tol) / -a);
      }
    }
    if (theta_max == kInf) return -1;
    int leave = -1;
    double best = 0.0;
    double best_ratio = kInf;
    for (int i = 0; i < m_; ++i) {
      const double a = alpha[i];
      double ratio;
      if (a > opt_.pivot_tol) {
        ratio = std::max(0.0, xb_[i]) / a;
      } else if (a < -opt_.pivot_tol && upper_[basis_[i]] < kInf) {
        ratio = std::max(0.0, upper_[basis_[i]] - xb_[i]) / -a;
      } else {
        continue;
      }
      if (ratio > theta_max) continue;
      if (bland) {
        if (leave < 0 || ratio < best_ratio - 1e-15 ||
            (ratio <= best_ratio + 1e-15 && basis_[i] < basis_[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      } else if (std::abs(a) > best) {
        best = std::abs(a);
        leave = i;
        best_ratio = ratio;
      }
    }
    theta = best_ratio;
    return leave;
  }

  void pivot(int enter, int leave, const Vec& alpha, double theta) {
    xb_.noalias() -= theta * alpha;
    xb_[leave] = theta;
    pos_[basis_[leave]] = -1;
    basis_[leave] = enter;
    pos_[enter] = leave;
    factor_.push(leave, alpha);
    if (static_cast<int>(factor_.size()) >= opt_.refactor_interval) refactor();
  }

  void iterate(const std::vector<double>& cost) {
    int stall = 0;
    bool fresh = false;
    bool retried = false;
    while (true) {
      if (iterations_ >= opt_.max_iterations) {
        throw SolverFailure(fmt::format("simplex iteration limit {} reached", opt_.max_iterations));
      }
      const bool bland = stall > opt_.stall_limit;
      const Vec y = duals(cost);
      const int enter = price(cost, y, bland);
      if (enter < 0) {
        if (fresh || factor_.size() == 0) return;
        refactor();  // confirm optimality on a clean factorization
        fresh = true;
        continue;
      }
      fresh = false;
      const Vec alpha = factor_.ftran(column(enter));
      double theta = 0.0;
      const int leave = ratio_test(alpha, bland, theta);
      if (leave < 0) {
        if (factor_.size() > 0) {
          refactor();
          continue;
        }
        throw SolverFailure("LP is unbounded below");
      }
      if (std::abs(alpha[leave]) < 1e-5 && factor_.size() > 0 && !retried) {
        refactor();  // small pivot: recompute it on a clean factorization
        retried = true;
        continue;
      }
      retried = false;
      stall = theta <= 1e-12 ? stall + 1 : 0;
      pivot(enter, leave, alpha, theta);
      ++iterations_;
    }
  }

  void drive_out_artificials() {
    for (int p = 0; p < m_; ++p) {
      if (type_[basis_[p]] != ColType::Artificial) continue;
      Vec e = Vec::Zero(m_);
      e[p] = 1.0;
      const Vec row = factor_.btran(e);
      int best = -1;
      double best_val = 1e-7;
      for (int j = 0; j < ncols_; ++j) {
        if (pos_[j] >= 0 || type_[j] == ColType::Artificial) continue;
        double v = 0.0;
        for (SpMat::InnerIterator it(A_, j); it; ++it) v += it.value() * row[it.row()];
        if (std::abs(v) > best_val) {
          best_val = std::abs(v);
          best = j;
        }
      }
      if (best < 0) continue;  // redundant row; the artificial stays pinned at 0
      const Vec alpha = factor_.ftran(column(best));
      pivot(best, p, alpha, 0.0);
    }
    refactor();
  }

  std::vector<double> structural_values() const {
    std::vector<double> x(n_, 0.0);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) x[basis_[i]] = xb_[i];
    }
    return x;
  }

  LpSolution finish() {
    LpSolution sol;
    sol.status = SolveStatus::Optimal;
    sol.iterations = iterations_;
    sol.values = structural_values();
    const Vec y = duals(cost_);
    double primal = 0.0;
    for (int i = 0; i < m_; ++i) primal += cost_[basis_[i]] * xb_[i];
    double dual_inf = 0.0;
    for (int j = 0; j < ncols_; ++j) {
      if (pos_[j] >= 0 || upper_[j] <= 0.0) continue;
      dual_inf = std::max(dual_inf, -reduced_cost(cost_, y, j));
    }
    sol.max_dual_infeasibility = dual_inf;
    sol.optimality_gap = std::abs(primal - b_.dot(y)) / std::max(1.0, std::abs(primal));
    return sol;
  }

  const LpProblem& lp_;
  std::vector<int> origin_;
  SolverOptions opt_;
  int m_ = 0;
  int n_ = 0;
  int ncols_ = 0;
  SpMat A_;
  Vec b_;
  std::vector<ColType> type_;
  std::vector<int> art_row_;
  std::vector<double> upper_;
  std::vector<double> cost_;
  std::vector<int> basis_;
  std::vector<int> pos_;
  Vec xb_;
  BasisFactor factor_;
  int iterations_ = 0;
};

// Reductions that keep x >= 0 implied: equality singletons fix a column, and
// an equality row whose one column is opposite in sign to all others (with a
// compatible right-hand side) expresses that column as a nonnegative
// combination of the rest, which is then substituted out.
struct Elimination {
  int col;
  double constant;
  std::vector<std::pair<int, double>> terms;
};

struct Presolved {
  LpProblem reduced;
  std::vector<int> row_origin;
  std::vector<int> col_origin;
  std::vector<Elimination> elims;
  double obj_const = 0.0;
  std::vector<int> infeasible_rows;
  std::string infeasible;
};

class Presolver {
 public:
  explicit Presolver(const LpProblem& lp) : lp_(lp) {
    const int m = static_cast<int>(lp.rows.size());
    coef_.resize(m);
    rhs_.resize(m);
    active_.assign(m, true);
    col_rows_.resize(lp.num_vars);
    cost_.assign(lp.num_vars, 0.0);
    gone_.assign(lp.num_vars, false);
    for (int i = 0; i < m; ++i) {
      const auto& row = lp.rows[i];
      rhs_[i] = row.rhs;
      for (std::size_t k = 0; k < row.cols.size(); ++k) {
        if (row.vals[k] == 0.0) continue;
        coef_[i][row.cols[k]] = row.vals[k];
        col_rows_[row.cols[k]].insert(i);
      }
    }
    for (std::size_t k = 0; k < lp.obj_cols.size(); ++k) cost_[lp.obj_cols[k]] += lp.obj_vals[k];
  }

  Presolved run() {
    const int m = static_cast<int>(lp_.rows.size());
    bool changed = true;
    while (changed && out_.infeasible.empty()) {
      changed = false;
      for (int i = 0; i < m && out_.infeasible.empty(); ++i) {
        if (!active_[i]) continue;
        if (coef_[i].empty()) {
          check_empty(i);
          continue;
        }
        if (lp_.rows[i].sense != RowSense::Eq) continue;
        changed |= reduce_equality(i);
      }
    }
    if (out_.infeasible.empty()) assemble();
    return std::move(out_);
  }

 private:
  void fail(int i, const std::string& why) {
    const auto& row = lp_.rows[i];
    out_.infeasible_rows.push_back(i);
    out_.infeasible = row.node.r >= 0
                          ? fmt::format("{} row #{} at ({},{}): {}", to_string(row.kind), i, row.node.r,
                                        row.node.s, why)
                          : fmt::format("{} row #{}: {}", to_string(row.kind), i, why);
  }

  void check_empty(int i) {
    const double tol = 1e-9 / lp_.rows[i].scale;
    const double r = rhs_[i];
    const auto sense = lp_.rows[i].sense;
    const bool ok = sense == RowSense::Eq ? std::abs(r) <= tol : sense == RowSense::Le ? r >= -tol : r <= tol;
    if (!ok) fail(i, fmt::format("constant row violated (0 {} {:.6g})", to_string(sense), r));
    active_[i] = false;
  }

  bool reduce_equality(int i) {
    const auto& row = coef_[i];
    const double b = rhs_[i];
    if (row.size() == 1) {
      const auto [j, a] = *row.begin();
      const double v = b / a;
      if (v < -1e-12) {
        fail(i, fmt::format("forces a negative value {:.6g}", v));
        return false;
      }
      active_[i] = false;
      substitute(j, std::max(0.0, v), {});
      return true;
    }
    int pos = 0;
    for (const auto& [j, a] : row) pos += a > 0.0;
    const int n = static_cast<int>(row.size());
    int pick = -1;
    double best = 0.0;
    for (const auto& [j, a] : row) {
      const bool lone = a > 0.0 ? pos == 1 : n - pos == 1;
      if (!lone || b / a < 0.0) continue;
      if (std::abs(a) > best) {
        best = std::abs(a);
        pick = j;
      }
    }
    if (pick < 0) return false;
    const double a = row.at(pick);
    std::vector<std::pair<int, double>> terms;
    for (const auto& [k, c] : row) {
      if (k != pick) terms.emplace_back(k, -c / a);
    }
    active_[i] = false;
    substitute(pick, b / a, terms);
    return true;
  }

  void substitute(int j, double constant, const std::vector<std::pair<int, double>>& terms) {
    const std::vector<int> rows(col_rows_[j].begin(), col_rows_[j].end());
    for (int i : rows) {
      auto& row = coef_[i];
      const double a = row.at(j);
      row.erase(j);
      rhs_[i] -= a * constant;
      for (const auto& [k, c] : terms) {
        double& v = row[k];
        const double before = std::abs(v);
        v += a * c;
        if (std::abs(v) <= 1e-14 * std::max(before, std::abs(a * c))) {
          row.erase(k);
          col_rows_[k].erase(i);
        } else {
          col_rows_[k].insert(i);
        }
      }
    }
    col_rows_[j].clear();
    out_.obj_const += cost_[j] * constant;
    for (const auto& [k, c] : terms) cost_[k] += cost_[j] * c;
    cost_[j] = 0.0;
    gone_[j] = true;
    out_.elims.push_back({j, constant, terms});
  }

  void assemble() {
    std::vector<int> new_col(lp_.num_vars, -1);
    for (int j = 0; j < lp_.num_vars; ++j) {
      if (gone_[j]) continue;
      new_col[j] = static_cast<int>(out_.col_origin.size());
      out_.col_origin.push_back(j);
    }
    auto& red = out_.reduced;
    red.num_vars = static_cast<int>(out_.col_origin.size());
    for (int j = 0; j < lp_.num_vars; ++j) {
      if (!gone_[j] && cost_[j] != 0.0) {
        red.obj_cols.push_back(new_col[j]);
        red.obj_vals.push_back(cost_[j]);
      }
    }
    for (std::size_t i = 0; i < lp_.rows.size(); ++i) {
      if (!active_[i]) continue;
      const auto& src = lp_.rows[i];
      LpRow row{{}, {}, src.sense, rhs_[i], src.scale, src.kind, src.node};
      for (const auto& [k, c] : coef_[i]) {
        row.cols.push_back(new_col[k]);
        row.vals.push_back(c);
      }
      red.rows.push_back(std::move(row));
      out_.row_origin.push_back(static_cast<int>(i));
    }
  }

  const LpProblem& lp_;
  std::vector<std::map<int, double>> coef_;
  std::vector<double> rhs_;
  std::vector<bool> active_;
  std::vector<std::set<int>> col_rows_;
  std::vector<double> cost_;
  std::vector<bool> gone_;
  Presolved out_;
};

std::vector<double> postsolve(const Presolved& pre, const std::vector<double>& reduced, int num_vars) {
  std::vector<double> x(num_vars, 0.0);
  for (std::size_t k = 0; k < pre.col_origin.size(); ++k) x[pre.col_origin[k]] = reduced[k];
  for (auto it = pre.elims.rbegin(); it != pre.elims.rend(); ++it) {
    double v = it->constant;
    for (const auto& [k, c] : it->terms) v += c * x[k];
    x[it->col] = v;
  }
  return x;
}

std::string describe_rows(const LpProblem& lp, const std::vector<int>& rows) {
  std::vector<std::string> names;
  for (int r : rows) {
    const auto& row = lp.rows[r];
    names.push_back(row.node.r >= 0 ? fmt::format("{}#{}({},{})", to_string(row.kind), r, row.node.r, row.node.s)
                                    : fmt::format("{}#{}", to_string(row.kind), r));
  }
  return fmt::format("{}", fmt::join(names, ", "));
}

LpSolution solve_impl(const LpProblem& problem, const SolverOptions& options) {
  problem.check_well_formed();
  Presolved pre = Presolver(problem).run();
  LpSolution sol;
  if (!pre.infeasible.empty()) {
    sol.status = SolveStatus::Infeasible;
    sol.violated_rows = pre.infeasible_rows;
    sol.infeasibility_reason = "presolve: " + pre.infeasible;
    return sol;
  }
  LpSolution red;
  if (pre.reduced.rows.empty()) {
    for (double c : pre.reduced.obj_vals) {
      if (c < 0.0) throw SolverFailure("LP is unbounded below");
    }
    red.status = SolveStatus::Optimal;
    red.values.assign(pre.reduced.num_vars, 0.0);
  } else {
    red = Simplex(pre.reduced, pre.row_origin, options).run();
  }
  sol.iterations = red.iterations;
  if (red.status == SolveStatus::Infeasible) {
    sol.status = SolveStatus::Infeasible;
    sol.violated_rows = red.violated_rows;
    sol.infeasibility_reason =
        fmt::format("{} left on rows [{}]", red.infeasibility_reason, describe_rows(problem, red.violated_rows));
    return sol;
  }
  sol.status = SolveStatus::Optimal;
  sol.values = postsolve(pre, red.values, problem.num_vars);
  for (auto& v : sol.values) {
    if (v < 0.0 && v > -options.feasibility_tol * 10) v = 0.0;
  }
  if (options.phase1_only) return sol;
  const auto res = compute_residuals(problem, sol.values);
  sol.max_eq_residual = res.max_eq;
  sol.max_ineq_violation = res.max_ineq;
  sol.objective = objective_value(problem, sol.values);
  sol.optimality_gap = red.optimality_gap;
  sol.max_dual_infeasibility = red.max_dual_infeasibility;
  if (res.max_eq > 1e-8 || res.max_ineq > 1e-8 || res.min_value < -1e-10 || sol.optimality_gap > 1e-7 ||
      sol.max_dual_infeasibility > 1e-7) {
    throw SolverFailure(fmt::format(
        "numeric breakdown: eq residual {:.2e}, ineq violation {:.2e}, min value {:.2e}, gap {:.2e}, "
        "dual infeasibility {:.2e}",
        res.max_eq, res.max_ineq, res.min_value, sol.optimality_gap, sol.max_dual_infeasibility));
  }
  return sol;
}

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const SolverOptions& options) {
  return solve_impl(problem, options);
}

bool lp_feasible(const LpProblem& problem, const SolverOptions& options) {
  SolverOptions o = options;
  o.phase1_only = true;
  return solve_impl(problem, o).status == SolveStatus::Optimal;
}

Residuals compute_residuals(const LpProblem& problem, const std::vector<double>& x) {
  Residuals r;
  r.min_value = x.empty() ? 0.0 : *std::min_element(x.begin(), x.end());
  for (const auto& row : problem.rows) {
    double lhs = 0.0;
    for (std::size_t k = 0; k < row.cols.size(); ++k) lhs += row.vals[k] * x[row.cols[k]];
    const double diff = lhs - row.rhs;
    switch (row.sense) {
      case RowSense::Eq: r.max_eq = std::max(r.max_eq, std::abs(diff)); break;
      case RowSense::Le: r.max_ineq = std::max(r.max_ineq, diff); break;
      case RowSense::Ge: r.max_ineq = std::max(r.max_ineq, -diff); break;
    }
  }
  return r;
}

double objective_value(const LpProblem& problem, const std::vector<double>& x) {
  double f = 0.0;
  for (std::size_t k = 0; k < problem.obj_cols.size(); ++k) f += problem.obj_vals[k] * x[problem.obj_cols[k]];
  return f;
}

}  // namespace lp2s
