#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lp2s/errors.hpp"
#include "lp2s/lp_solve.hpp"

namespace lp2s {

namespace {

class OracleSearch {
 public:
  OracleSearch(const LpInstance& inst, double step) : inst_(inst), R_(inst.R) {
    const int n = static_cast<int>(std::llround(1.0 / step));
    for (int i = 0; i <= n; ++i) grid_.push_back(static_cast<double>(i) / n);
    q_.resize(R_);
    for (int r = 0; r < R_; ++r) {
      for (int s = 0; s <= r; ++s) q_[r].push_back(posterior_mean(inst.prior, r, s));
    }
    const auto w = weights(inst.weight, inst.prior);
    for (double x : w) coef_.push_back(x - (1.0 - inst.delta0));
    target_ = inst.survival_mass();
    s_star_.assign(R_, 0);
    frac_.assign(R_, 0.0);
  }

  OracleResult run() {
    if (R_ == 1) {
      // The root pull is the only one; every pulled arm survives.
      const double q = q_[0][0];
      const double quality = target_ * ((1.0 - q) * coef_[0] + q * coef_[1]);
      s_star_[0] = 0;
      frac_[0] = target_;
      ++out_.evaluated;
      if (satisfies(quality)) record(target_);
      return out_;
    }
    std::vector<double> level{1.0 - q_[0][0], q_[0][0]};
    descend(1, 0, level, level[0] + level[1]);
    return out_;
  }

 private:
  bool satisfies(double quality) const {
    return inst_.direction == Direction::Geq ? quality >= -1e-12 : quality <= 1e-12;
  }

  void record(double objective) {
    if (out_.feasible && objective >= out_.objective) return;
    out_.feasible = true;
    out_.objective = objective;
    out_.policy.s_star = s_star_;
    out_.policy.frac = frac_;
  }

  // level: masses at round r with the root pulled for sure; cost: pulls so far.
  void descend(int r, int floor, const std::vector<double>& level, double cost) {
    if (r == R_ - 1) {
      for (int t = floor; t <= r; ++t) last_round(t, level, cost);
      return;
    }
    std::vector<double> next(r + 2);
    for (int t = floor; t <= r; ++t) {
      s_star_[r] = t;
      for (double f : grid_) {
        frac_[r] = f;
        std::fill(next.begin(), next.end(), 0.0);
        double mass = 0.0;
        for (int s = t; s <= r; ++s) {
          const double pulled = level[s] * (s == t ? f : 1.0);
          next[s + 1] += pulled * q_[r][s];
          next[s] += pulled * (1.0 - q_[r][s]);
          mass += pulled;
        }
        descend(r + 1, t, next, cost + mass);
      }
    }
  }

  // Everything is linear in the last round's fraction f; the scaled
  // objective is linear-fractional in f, so only interval endpoints matter.
  void last_round(int t, const std::vector<double>& level, double cost) {
    const int r = R_ - 1;
    s_star_[r] = t;
    double sa = 0.0;
    double qa = 0.0;
    for (int s = t + 1; s <= r; ++s) {
      sa += level[s];
      qa += level[s] * (q_[r][s] * coef_[s + 1] + (1.0 - q_[r][s]) * coef_[s]);
    }
    const double sb = level[t];
    const double qb = level[t] * (q_[r][t] * coef_[t + 1] + (1.0 - q_[r][t]) * coef_[t]);
    double lo = 0.0;
    double hi = 1.0;
    auto restrict = [&](double c0, double c1, double slack) {  // c0 + c1 f >= -slack
      if (c1 > 0.0) {
        lo = std::max(lo, (-slack - c0) / c1);
      } else if (c1 < 0.0) {
        hi = std::min(hi, (-slack - c0) / c1);
      } else if (c0 < -slack) {
        hi = -1.0;
      }
    };
    const double sign = inst_.direction == Direction::Geq ? 1.0 : -1.0;
    restrict(sign * qa, sign * qb, 1e-12);
    restrict(sa - target_, sb, 1e-14);  // root action (L/K)/S must not exceed 1
    if (lo > hi) return;
    for (double f : {lo, hi}) {
      const double surv = sa + f * sb;
      if (!(surv > 0.0)) continue;
      ++out_.evaluated;
      const double root = std::min(1.0, target_ / surv);
      frac_[r] = f;
      frac_[0] = root;
      record(root * (cost + surv));
    }
  }

  const LpInstance& inst_;
  int R_;
  std::vector<double> grid_;
  std::vector<std::vector<double>> q_;
  std::vector<double> coef_;
  double target_ = 0.0;
  std::vector<int> s_star_;
  std::vector<double> frac_;
  OracleResult out_;
};

}  // namespace

OracleResult oracle_threshold_search(const LpInstance& inst, double frac_step) {
  inst.validate();
  if (inst.R > 6) throw InvalidArgument(fmt::format("oracle search supports R <= 6, got {}", inst.R));
  if (!(frac_step > 0.0 && frac_step <= 1.0)) throw InvalidArgument("frac_step must lie in (0, 1]");
  return OracleSearch(inst, frac_step).run();
}

}  // namespace lp2s
