#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lp2s/errors.hpp"
#include "lp2s/sim.hpp"
#include "oracles.hpp"

using namespace lp2s;
using doctest::Approx;

namespace {

// Pulls nothing and names a uniformly random arm.
class RandomGuess : public Policy {
 public:
  RandomGuess(int K, std::uint64_t seed) : K_(K), rng_(seed) {}
  std::string name() const override { return "guess"; }
  int arms() const override { return K_; }
  bool finished() const override { return true; }
  std::vector<int> decide() override { throw ProtocolError("nothing to decide"); }
  void observe(const std::vector<int>&, const std::vector<int>&) override {}
  int recommend() override { return rng_.below(K_); }
  long pulls_used() const override { return 0; }

 private:
  int K_;
  Rng rng_;
};

// Pulls arm 0 twice in one batch.
class Doubler : public Policy {
 public:
  std::string name() const override { return "doubler"; }
  int arms() const override { return 2; }
  bool finished() const override { return done_; }
  std::vector<int> decide() override { return {0, 0}; }
  void observe(const std::vector<int>&, const std::vector<int>&) override { done_ = true; }
  int recommend() override { return 0; }
  long pulls_used() const override { return 2; }

 private:
  bool done_ = false;
};

// P(uniform exploration names a best arm) under Beta(1,1), K arms, n rounds.
// Given the best mean x, other arms' counts are iid with mass G(s, x) =
// int_0^x C(n,s) u^s (1-u)^(n-s) du; ties are split evenly.
double uniform_pb_oracle(int K, int n) {
  auto f = [&](double x) {
    std::vector<double> G(n + 1);
    for (int s = 0; s <= n; ++s) {
      G[s] = oracle::choose(n, s) * oracle::beta_fn(s + 1, n - s + 1) * oracle::ibeta_int(x, s + 1, n - s + 1);
    }
    double total = 0.0;
    double below = 0.0;
    for (int s0 = 0; s0 <= n; ++s0) {
      const double own = oracle::choose(n, s0) * std::pow(x, s0) * std::pow(1.0 - x, n - s0);
      double tie = 0.0;
      for (int m = 0; m <= K - 1; ++m) {
        tie += oracle::choose(K - 1, m) * std::pow(G[s0], m) * std::pow(below, K - 1 - m) / (m + 1);
      }
      total += own * tie;
      below += G[s0];
    }
    return total;
  };
  return K * oracle::simpson(f, 0.0, 1.0, 4000);
}

MonteCarloSpec uniform_spec(int K, int rounds, long N, std::uint64_t seed) {
  MonteCarloSpec spec;
  spec.policy = "uniform";
  spec.make = [=](std::uint64_t s) { return make_uniform(K, rounds, s); };
  spec.K = K;
  spec.episodes = N;
  spec.master_seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("protocol check") {
  CHECK(protocol_check({{0, 1}, {1}}, 2).empty());
  const auto dup = protocol_check({{0, 0}}, 2);
  REQUIRE_FALSE(dup.empty());
  CHECK_FALSE(protocol_check({{0, 1, 2}}, 2).empty());
  CHECK_FALSE(protocol_check({{3}}, 2).empty());
  CHECK_FALSE(protocol_check({{-1}}, 2).empty());

  Doubler d;
  CHECK_THROWS_AS(run_episode(d, make_environment({0.5, 0.5}), 10, 1), ProtocolError);
}

TEST_CASE("environments") {
  Rng rng(5);
  const auto flat = sample_environment(PriorSpec::discrete({{0.3, 1.0}}), 5, rng);
  CHECK(flat.best.size() == 5);
  CHECK(flat.mu_star == 0.3);
  CHECK(sample_environment(PriorSpec::beta(2, 2), 1, rng).best == std::vector<int>{0});

  const auto big = sample_environment(PriorSpec::beta(1, 1), 10000, rng);
  double m = 0.0;
  for (double u : big.mu) m += u;
  m /= 10000.0;
  CHECK(std::abs(m - 0.5) < 3.0 / std::sqrt(12.0) / 100.0);
  CHECK(big.best.size() == 1);
  CHECK(big.mu_star == big.mu[big.best[0]]);

  const auto e = make_environment({0.2, 0.7, 0.7});
  CHECK(e.best == std::vector<int>{1, 2});
  CHECK_THROWS_AS(make_environment({}), InvalidArgument);
}

TEST_CASE("episode accounting") {
  auto u = make_uniform(2, 3, 1);
  const auto res = run_episode(*u, make_environment({0.3, 0.9}), 100, 4);
  CHECK(res.total_pulls == 6);
  CHECK(res.simple_regret >= 0.0);
  CHECK(res.is_best == (res.recommended == 1));

  auto z = make_uniform(4, 2, 1);
  const auto zero = run_episode(*z, make_environment({0, 0, 0, 0}), 100, 4);
  CHECK(zero.simple_regret == 0.0);
  CHECK(zero.is_best);
}

TEST_CASE("common random numbers") {
  CHECK(crn_reward(9, 3, 17, 0.4) == crn_reward(9, 3, 17, 0.4));
  int hits = 0;
  for (long k = 0; k < 20000; ++k) hits += crn_reward(9, 2, k, 0.3);
  CHECK(std::abs(hits / 20000.0 - 0.3) < 3 * std::sqrt(0.3 * 0.7 / 20000.0));
  // the k-th pull outcome is shared: a lower mean never wins where a higher one loses
  for (long k = 0; k < 500; ++k) CHECK(crn_reward(4, 1, k, 0.2) <= crn_reward(4, 1, k, 0.6));
}

TEST_CASE("summary statistics") {
  std::vector<EpisodeRow> rows(4);
  const double sr[] = {0.1, 0.3, 0.0, 0.2};
  for (int i = 0; i < 4; ++i) {
    rows[i].episode = i;
    rows[i].result.simple_regret = sr[i];
    rows[i].result.is_best = sr[i] == 0.0;
    rows[i].result.total_pulls = 10 * (i + 1);
  }
  const auto s = summarize("x", rows);
  CHECK(s.episodes == 4);
  CHECK(s.mean_sr == Approx(0.15));
  // sample std with n - 1
  CHECK(*s.se_sr == Approx(std::sqrt((0.0025 + 0.0225 + 0.0225 + 0.0025) / 3.0) / 2.0));
  CHECK(s.mean_pb == Approx(0.25));
  CHECK(s.mean_t == Approx(25.0));
  CHECK(s.t_q50 == 20.0);

  const auto one = summarize("x", {rows[1]});
  CHECK_FALSE(one.se_sr.has_value());
  CHECK_FALSE(one.se_pb.has_value());
  CHECK(one.mean_sr == 0.3);
  CHECK_THROWS_AS(summarize("x", {}), InvalidArgument);
}

TEST_CASE("Monte Carlo output does not depend on parallelism") {
  auto spec = uniform_spec(20, 4, 60, 42);
  const auto a = monte_carlo(spec);
  spec.parallelism = 8;
  const auto b = monte_carlo(spec);
  std::ostringstream sa;
  std::ostringstream sb;
  write_episode_csv(sa, a.rows, "uniform", 20, 4, true);
  write_episode_csv(sb, b.rows, "uniform", 20, 4, true);
  const auto text = sa.str();
  CHECK(text == sb.str());
  CHECK(std::count(text.begin(), text.end(), '\n') == 61);
}

TEST_CASE("episode errors carry the episode index") {
  MonteCarloSpec spec;
  spec.policy = "doubler";
  spec.make = [](std::uint64_t) { return std::make_unique<Doubler>(); };
  spec.K = 2;
  spec.episodes = 3;
  try {
    monte_carlo(spec);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("episode 0") != std::string::npos);
  }
}

TEST_CASE("uniform exploration PB against the enumeration oracle") {
  CHECK(uniform_pb_oracle(1, 3) == Approx(1.0).epsilon(1e-9));
  // K = 2, one round: PB = 1/2 + (E[max (1 - min)] - E[min (1 - max)]) / 2 = 1/2 + (5/12 - 1/12) / 2
  CHECK(uniform_pb_oracle(2, 1) == Approx(2.0 / 3.0).epsilon(1e-9));
  for (const auto& [K, rounds, N] : {std::tuple{3, 2, 20000L}, std::tuple{50, 20, 2000L}}) {
    const auto mc = monte_carlo(uniform_spec(K, rounds, N, 99));
    const double ref = uniform_pb_oracle(K, rounds);
    CHECK(std::abs(mc.summary.mean_pb - ref) < 3 * *mc.summary.se_pb);
  }
}

TEST_CASE("random recommender under a uniform prior") {
  const int K = 9;
  MonteCarloSpec spec;
  spec.policy = "guess";
  spec.make = [&](std::uint64_t s) { return std::make_unique<RandomGuess>(K, s); };
  spec.K = K;
  spec.episodes = 5000;
  spec.master_seed = 3;
  const auto s = monte_carlo(spec).summary;
  CHECK(std::abs(s.mean_sr - (0.9 - 0.5)) < 3 * *s.se_sr);
  CHECK(std::abs(s.mean_pb - 1.0 / 9.0) < 3 * *s.se_pb);
  CHECK(s.mean_t == 0.0);
}

TEST_CASE("Welch test against a reference") {
  const auto w = welch_test({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10});
  CHECK(w.t == Approx(-1.8973665961010275).epsilon(1e-12));
  CHECK(w.df == Approx(5.882352941176471).epsilon(1e-12));
  CHECK(w.p_value == Approx(0.10753119493062718).epsilon(1e-9));
}
