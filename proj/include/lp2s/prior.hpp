#pragma once
// Priors over Bernoulli arm means and the posterior quantities the LP needs:
// posterior means q(r,s), prior moments E[mu^r], the prior cdf, E[max of K
// draws], and the terminal weight functions w(s) of the PAC/SRM/FC variants.

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lp2s {

struct BetaPrior {
  double alpha;
  double beta;
};

struct Atom {
  double mean;
  double prob;
};

struct DiscretePrior {
  std::vector<Atom> atoms;  // sorted ascending by mean
};

class PriorSpec {
 public:
  static PriorSpec beta(double alpha, double beta);
  // Atoms are sorted on construction; probabilities must sum to 1 (1e-12).
  static PriorSpec discrete(std::vector<Atom> atoms);
  // n equal-weight atoms, one per quantile bin of Beta(a, b), each at the
  // conditional mean of its bin.
  static PriorSpec beta_quantile_grid(double alpha, double beta, int n);

  bool is_beta() const { return std::holds_alternative<BetaPrior>(rep_); }
  const BetaPrior& as_beta() const;
  const DiscretePrior& as_discrete() const;
  std::string describe() const;

 private:
  explicit PriorSpec(std::variant<BetaPrior, DiscretePrior> rep) : rep_(std::move(rep)) {}
  std::variant<BetaPrior, DiscretePrior> rep_;
};

enum class Variant { Pac, Srm, Fc };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct WeightSpec {
  Variant variant;
  int R;
  std::optional<double> mu0;  // PAC only
  std::optional<int> K;       // SRM and FC only

  static WeightSpec pac(double mu0, int R);
  static WeightSpec srm(int K, int R);
  static WeightSpec fc(int K, int R);
  void validate() const;
};

// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double x, double a, double b);

// q(r, s): posterior mean of mu after s successes in r pulls.
double posterior_mean(const PriorSpec& prior, int r, int s);

// E[mu^r]; 1 at r = 0.
double prior_moment(const PriorSpec& prior, int r);

double prior_cdf(const PriorSpec& prior, double u);

// E[max of K iid prior draws] = int_0^1 (1 - F(u)^K) du.
double expected_max(const PriorSpec& prior, int K);

// w(s) for one terminal success count.
double weight(const WeightSpec& spec, const PriorSpec& prior, int s);

// w(0), ..., w(R). Shares the E[mu*] computation across s for SRM.
std::vector<double> weights(const WeightSpec& spec, const PriorSpec& prior);

}  // namespace lp2s
