#include "lp2s/bounds.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/beta.hpp>
#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s {

BoundReport check_bound(std::string name, double bound, std::optional<double> observed, double tol) {
  BoundReport r{std::move(name), bound, observed, true, 0.0};
  if (observed) {
    r.slack = bound - *observed;
    r.satisfied = *observed <= bound + tol;
  }
  return r;
}

double thm2_bound(const PriorSpec& prior, int K, int R, double L) {
  if (K < 1 || R < 1) throw InvalidArgument("thm2_bound needs K, R >= 1");
  const double top = prior_moment(prior, R);
  if (!(top > 0.0)) throw DegeneratePriorError(fmt::format("E mu^{} vanishes; the bound is undefined", R));
  double sum = 0.0;
  for (int r = 1; r <= R; ++r) sum += prior_moment(prior, r);
  return L / (K * top) * sum;
}

RateRegime corollary_rate(double a, double b, int R, double L, int K) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("corollary_rate needs a, b > 0");
  const double base = L * R / K;
  if (b < 1.0) return {"0<b<1", base};
  if (b == 1.0) return {"b=1", base * std::log(static_cast<double>(R))};
  return {"b>1", L * std::pow(static_cast<double>(R), b) / K};
}

double expected_total_cost(double f_star, int K, double L, int R) {
  if (f_star < 0.0 || K < 0 || L < 0.0 || R < 0) throw InvalidArgument("expected_total_cost needs non-negative inputs");
  return K * f_star + L * R;
}

double thm4_bound(double L, double delta0) {
  if (L < 0.0 || delta0 < 0.0 || delta0 > 1.0) throw InvalidArgument("thm4_bound needs L >= 0, delta0 in [0,1]");
  return std::exp(-L) + 1.0 - delta0;
}

Thm3Bound thm3_bound(double mu0, double L, int R, double delta0, double C1, double C2) {
  if (!(L > 1.0) || R < 1) throw InvalidArgument("thm3_bound needs L > 1 and R >= 1");
  const double miss = C2 * std::exp(-(1.0 - delta0) * L);
  return {miss, 1.0 - mu0 + C1 * std::sqrt(std::log(L) / R) + miss};
}

Thm5Bound thm5_bound(double L, double delta0, int K, int R, double alpha0, double c, double C1, double C2,
                     double C3) {
  if (!(alpha0 > 0.0) || !(c > 2.0 / alpha0)) {
    throw InvalidArgument(fmt::format("thm5_bound needs c > 2/alpha0, got c={} alpha0={}", c, alpha0));
  }
  const double head = 1.0 - (1.0 - delta0) * L + std::exp(-L);
  const double kd = static_cast<double>(K);
  const double first =
      head + C1 * std::pow(kd, -(alpha0 * c - 2.0)) + C2 * L * std::exp(-R * std::pow(kd, -2.0 * c) / 4.0);
  const double second = head + C3 * std::sqrt(std::log(L) / R);
  return {first, first, second, std::min(first, second)};
}

AssumptionReport assumption_fc_diagnostic(const PriorSpec& prior, double alpha, const std::vector<double>& d_grid) {
  if (!prior.is_beta()) throw InvalidArgument("the FC assumption diagnostic needs a Beta prior");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  const auto& b = prior.as_beta();
  AssumptionReport rep;
  rep.worst_tail_margin = std::numeric_limits<double>::infinity();
  for (double d : d_grid) {
    if (!(d >= 0.0 && d <= 1.0)) throw InvalidArgument(fmt::format("d = {} outside [0,1]", d));
    const double margin = prior_cdf(prior, 1.0 - d) - (1.0 - std::pow(d, alpha));
    if (margin < rep.worst_tail_margin) {
      rep.worst_tail_margin = margin;
      rep.worst_d = d;
    }
  }
  rep.tail_ok = rep.worst_tail_margin >= -1e-12;

  if (b.alpha < 1.0 || b.beta < 1.0) {
    rep.lipschitz_estimate = std::numeric_limits<double>::infinity();
  } else {
    const boost::math::beta_distribution<double> dist(b.alpha, b.beta);
    constexpr int kGrid = 10000;
    for (int i = 0; i <= kGrid; ++i) {
      rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, boost::math::pdf(dist, static_cast<double>(i) / kGrid));
    }
    if (b.alpha + b.beta > 2.0) {
      const double mode = (b.alpha - 1.0) / (b.alpha + b.beta - 2.0);
      rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, boost::math::pdf(dist, mode));
    }
  }
  rep.lipschitz_ok = std::isfinite(rep.lipschitz_estimate);
  return rep;
}

}  // namespace lp2s
