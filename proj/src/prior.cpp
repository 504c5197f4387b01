#include "lp2s/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s {

namespace {

constexpr double kMaxMeanTol = 1e-10;  // E[mu*] quadrature target
constexpr double kFcTol = 1e-8;        // FC weight quadrature target

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// c * log(x), with 0 * log(0) = 0.
double xlogy(double c, double x) { return c == 0.0 ? 0.0 : c * std::log(x); }

void check_counts(int r, int s) {
  if (r < 0 || s < 0 || s > r) {
    throw InvalidArgument(fmt::format("need 0 <= s <= r, got r={}, s={}", r, s));
  }
}

// Posterior probabilities of each atom after s successes in r pulls.
std::vector<double> atom_posterior(const DiscretePrior& d, int r, int s) {
  const auto n = d.atoms.size();
  std::vector<double> logw(n, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = d.atoms[i];
    if (a.prob <= 0.0) continue;
    if ((a.mean == 0.0 && s > 0) || (a.mean == 1.0 && s < r)) continue;
    logw[i] = std::log(a.prob) + xlogy(s, a.mean) + xlogy(r - s, 1.0 - a.mean);
    top = std::max(top, logw[i]);
  }
  if (!std::isfinite(top)) {
    throw DegeneratePosteriorError(
        fmt::format("discrete prior has zero posterior mass at r={}, s={}", r, s));
  }
  std::vector<double> post(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    post[i] = std::isfinite(logw[i]) ? std::exp(logw[i] - top) : 0.0;
    total += post[i];
  }
  for (auto& p : post) p /= total;
  return post;
}

// f(u, 1-u) on (0,1) by tanh-sinh; the complement is exact near 1.
template <class F>
double integrate_unit(F&& f, double abs_tol, const char* what) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  double err = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(
      [&](double x, double xc) {
        const double uc = x > 0.5 ? xc : 1.0 - x;
        return f(x, uc);
      },
      0.0, 1.0, 1e-12, &err, &l1);
  if (!(err <= abs_tol) || !std::isfinite(value)) {
    throw NumericAccuracyError(fmt::format("{}: quadrature error estimate {:.3e}", what, err), err);
  }
  return value;
}

// F(u)^n computed through logs so large n does not lose the tail.
double cdf_power(const PriorSpec& prior, double u, int n) {
  if (n == 0) return 1.0;
  const double f = prior_cdf(prior, u);
  if (f <= 0.0) return 0.0;
  return std::exp(n * std::log(f));
}

double log_beta_cdf(const BetaPrior& b, double u, double uc) {
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u < 0.5) return std::log(boost::math::ibeta(b.alpha, b.beta, u));
  if (uc <= 0.0) return 0.0;
  return std::log1p(-boost::math::ibeta(b.beta, b.alpha, uc));
}

double fc_weight_beta(const BetaPrior& b, int K, int R, int s) {
  if (K == 1) return 1.0;
  const double al = b.alpha + s;
  const double be = b.beta + R - s;
  const double lb = log_beta(al, be);
  const double v = integrate_unit(
      [&](double u, double uc) {
        const double lf = log_beta_cdf(b, u, uc);
        if (!std::isfinite(lf)) return 0.0;
        return std::exp((K - 1) * lf + xlogy(al - 1.0, u) + xlogy(be - 1.0, uc) - lb);
      },
      kFcTol, "FC weight");
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

PriorSpec PriorSpec::beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw InvalidArgument(fmt::format("Beta prior needs alpha, beta > 0, got ({}, {})", alpha, beta));
  }
  return PriorSpec(BetaPrior{alpha, beta});
}

PriorSpec PriorSpec::discrete(std::vector<Atom> atoms) {
  if (atoms.empty()) throw InvalidArgument("discrete prior needs at least one atom");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.mean >= 0.0 && a.mean <= 1.0)) {
      throw InvalidArgument(fmt::format("atom mean {} outside [0,1]", a.mean));
    }
    if (!(a.prob >= 0.0 && a.prob <= 1.0)) {
      throw InvalidArgument(fmt::format("atom probability {} outside [0,1]", a.prob));
    }
    total += a.prob;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument(fmt::format("atom probabilities sum to {:.17g}, not 1", total));
  }
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const Atom& x, const Atom& y) { return x.mean < y.mean; });
  return PriorSpec(DiscretePrior{std::move(atoms)});
}

PriorSpec PriorSpec::beta_quantile_grid(double alpha, double beta, int n) {
  if (n < 1) throw InvalidArgument("quantile grid needs n >= 1");
  PriorSpec::beta(alpha, beta);  // validates
  // Each atom sits at the conditional mean of its quantile bin.
  std::vector<double> edge(n + 1);
  for (int i = 0; i <= n; ++i) {
    edge[i] = i == 0 ? 0.0 : i == n ? 1.0 : boost::math::ibeta_inv(alpha, beta, static_cast<double>(i) / n);
  }
  const double mean = alpha / (alpha + beta);
  std::vector<Atom> atoms(n);
  for (int i = 0; i < n; ++i) {
    const double mass = boost::math::ibeta(alpha + 1, beta, edge[i + 1]) - boost::math::ibeta(alpha + 1, beta, edge[i]);
    atoms[i] = {std::clamp(n * mean * mass, edge[i], edge[i + 1]), 1.0 / n};
  }
  // Rounding of 1/n can leave the sum a few ulps off; fix the last atom.
  double head = 0.0;
  for (int i = 0; i + 1 < n; ++i) head += atoms[i].prob;
  atoms.back().prob = 1.0 - head;
  return discrete(std::move(atoms));
}

const BetaPrior& PriorSpec::as_beta() const {
  if (!is_beta()) throw InvalidArgument("prior is not Beta");
  return std::get<BetaPrior>(rep_);
}

const DiscretePrior& PriorSpec::as_discrete() const {
  if (is_beta()) throw InvalidArgument("prior is not discrete");
  return std::get<DiscretePrior>(rep_);
}

std::string PriorSpec::describe() const {
  if (is_beta()) {
    const auto& b = as_beta();
    return fmt::format("Beta({}, {})", b.alpha, b.beta);
  }
  return fmt::format("Discrete({} atoms)", as_discrete().atoms.size());
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Pac: return "pac";
    case Variant::Srm: return "srm";
    case Variant::Fc: return "fc";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pac") return Variant::Pac;
  if (lower == "srm") return Variant::Srm;
  if (lower == "fc") return Variant::Fc;
  throw InvalidArgument(fmt::format("unknown variant '{}'", name));
}

WeightSpec WeightSpec::pac(double mu0, int R) {
  WeightSpec w{Variant::Pac, R, mu0, std::nullopt};
  w.validate();
  return w;
}

WeightSpec WeightSpec::srm(int K, int R) {
  WeightSpec w{Variant::Srm, R, std::nullopt, K};
  w.validate();
  return w;
}

WeightSpec WeightSpec::fc(int K, int R) {
  WeightSpec w{Variant::Fc, R, std::nullopt, K};
  w.validate();
  return w;
}

void WeightSpec::validate() const {
  if (R < 1) throw InvalidArgument("R must be >= 1");
  if (variant == Variant::Pac) {
    if (!mu0 || K) throw InvalidArgument("PAC weight takes mu0 and no K");
    if (!(*mu0 > 0.0 && *mu0 < 1.0)) throw InvalidArgument("mu0 must lie in (0,1)");
  } else {
    if (mu0 || !K) throw InvalidArgument(to_string(variant) + " weight takes K and no mu0");
    if (*K < 1) throw InvalidArgument("K must be >= 1");
  }
}

double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument(fmt::format("x={} outside [0,1]", x));
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("incomplete beta needs a, b > 0");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  try {
    return boost::math::ibeta(a, b, x);
  } catch (const std::exception& e) {
    throw NumericAccuracyError(fmt::format("ibeta({}, {}, {}) failed: {}", a, b, x, e.what()),
                               std::numeric_limits<double>::infinity());
  }
}

double posterior_mean(const PriorSpec& prior, int r, int s) {
  check_counts(r, s);
  if (prior.is_beta()) {
    const auto& b = prior.as_beta();
    return (b.alpha + s) / (b.alpha + b.beta + r);
  }
  const auto& d = prior.as_discrete();
  const auto post = atom_posterior(d, r, s);
  double m = 0.0;
  for (std::size_t i = 0; i < post.size(); ++i) m += post[i] * d.atoms[i].mean;
  return m;
}

double prior_moment(const PriorSpec& prior, int r) {
  if (r < 0) throw InvalidArgument("moment order must be >= 0");
  if (r == 0) return 1.0;
  if (prior.is_beta()) {
    const auto& b = prior.as_beta();
    return std::exp(log_beta(b.alpha + r, b.beta) - log_beta(b.alpha, b.beta));
  }
  double m = 0.0;
  for (const auto& a : prior.as_discrete().atoms) m += a.prob * std::pow(a.mean, r);
  return m;
}

double prior_cdf(const PriorSpec& prior, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument(fmt::format("u={} outside [0,1]", u));
  if (prior.is_beta()) {
    const auto& b = prior.as_beta();
    return reg_inc_beta(u, b.alpha, b.beta);
  }
  double c = 0.0;
  for (const auto& a : prior.as_discrete().atoms) {
    if (a.mean > u) break;
    c += a.prob;
  }
  return std::min(c, 1.0);
}

double expected_max(const PriorSpec& prior, int K) {
  if (K < 1) throw InvalidArgument("K must be >= 1");
  if (prior.is_beta()) {
    if (K == 1) {
      const auto& b = prior.as_beta();
      return b.alpha / (b.alpha + b.beta);
    }
    const auto& b = prior.as_beta();
    return integrate_unit(
        [&](double u, double uc) {
          const double lf = log_beta_cdf(b, u, uc);
          if (!std::isfinite(lf)) return 1.0;
          return -std::expm1(K * lf);
        },
        kMaxMeanTol, "expected max");
  }
  // P(max = mu_i) = F(mu_i)^K - F(mu_{i-1})^K over sorted atoms.
  double below = 0.0;
  double cum = 0.0;
  double m = 0.0;
  for (const auto& a : prior.as_discrete().atoms) {
    cum += a.prob;
    const double at = std::pow(std::min(cum, 1.0), K);
    m += a.mean * (at - below);
    below = at;
  }
  return m;
}

double weight(const WeightSpec& spec, const PriorSpec& prior, int s) {
  spec.validate();
  check_counts(spec.R, s);
  const int R = spec.R;
  switch (spec.variant) {
    case Variant::Pac: {
      const double mu0 = *spec.mu0;
      if (prior.is_beta()) {
        const auto& b = prior.as_beta();
        return boost::math::ibetac(b.alpha + s, b.beta + R - s, mu0);
      }
      const auto& d = prior.as_discrete();
      const auto post = atom_posterior(d, R, s);
      double w = 0.0;
      for (std::size_t i = 0; i < post.size(); ++i) {
        if (d.atoms[i].mean >= mu0) w += post[i];
      }
      return w;
    }
    case Variant::Srm:
      return expected_max(prior, *spec.K) - posterior_mean(prior, R, s);
    case Variant::Fc: {
      const int K = *spec.K;
      if (prior.is_beta()) return fc_weight_beta(prior.as_beta(), K, R, s);
      const auto& d = prior.as_discrete();
      const auto post = atom_posterior(d, R, s);
      double w = 0.0;
      for (std::size_t i = 0; i < post.size(); ++i) {
        if (post[i] > 0.0) w += post[i] * cdf_power(prior, d.atoms[i].mean, K - 1);
      }
      return w;
    }
  }
  return 0.0;
}

std::vector<double> weights(const WeightSpec& spec, const PriorSpec& prior) {
  spec.validate();
  std::vector<double> w(spec.R + 1);
  if (spec.variant == Variant::Srm) {
    const double top = expected_max(prior, *spec.K);
    for (int s = 0; s <= spec.R; ++s) w[s] = top - posterior_mean(prior, spec.R, s);
    return w;
  }
  for (int s = 0; s <= spec.R; ++s) w[s] = weight(spec, prior, s);
  return w;
}

}  // namespace lp2s
