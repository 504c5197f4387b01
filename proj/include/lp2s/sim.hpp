#pragma once
// Bayesian environments, single episodes under the batch protocol, and
// seeded parallel Monte Carlo.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lp2s/policy.hpp"
#include "lp2s/prior.hpp"
#include "lp2s/rng.hpp"

namespace lp2s {

struct Environment {
  std::vector<double> mu;
  std::vector<int> best;  // every index attaining mu_star
  double mu_star = 0.0;
};

Environment make_environment(std::vector<double> mu);
Environment sample_environment(const PriorSpec& prior, int K, Rng& rng);

// Reward of the k-th pull (k = 0, 1, ...) of an arm is fixed by
// (seed, arm, k), so two policies run on the same seed share outcomes.
int crn_reward(std::uint64_t seed, int arm, long k, double mu);

struct EpisodeResult {
  int recommended = -1;
  double simple_regret = 0.0;
  bool is_best = false;
  long total_pulls = 0;
  long stage1_pulls = 0;
  long stage2_pulls = 0;
  int survivors = -1;  // -1 when the policy has no screening stage
};

using Trace = std::vector<std::vector<int>>;

// Human-readable violations: duplicate arms, out-of-range arms, batches larger than K.
std::vector<std::string> protocol_check(const Trace& batches, int K);

// Throws ProtocolError on a protocol violation.
EpisodeResult run_episode(Policy& policy, const Environment& env, int max_batches, std::uint64_t reward_seed,
                          Trace* trace = nullptr);

struct MetricsSummary {
  std::string policy;
  long episodes = 0;
  double mean_sr = 0.0;
  std::optional<double> se_sr;  // absent for a single episode
  double mean_pb = 0.0;
  std::optional<double> se_pb;
  double mean_t = 0.0;
  double t_q10 = 0.0;
  double t_q50 = 0.0;
  double t_q90 = 0.0;
};

struct EpisodeRow {
  long episode = 0;
  std::uint64_t seed = 0;
  EpisodeResult result;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(std::uint64_t seed)>;

struct MonteCarloSpec {
  std::string policy;
  PolicyFactory make;
  PriorSpec prior = PriorSpec::beta(1.0, 1.0);
  int K = 1;
  long episodes = 1;
  std::uint64_t master_seed = 0;
  int max_batches = 1 << 30;
  int parallelism = 1;
};

struct MonteCarloResult {
  std::vector<EpisodeRow> rows;
  MetricsSummary summary;
};

// Episode e draws its environment from derive_seed(master, e, 0), rewards
// from stream 1 and policy randomness from stream 2, so output does not
// depend on parallelism.
MonteCarloResult monte_carlo(const MonteCarloSpec& spec);

MetricsSummary summarize(const std::string& policy, const std::vector<EpisodeRow>& rows);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

WelchResult welch_test(const std::vector<double>& x, const std::vector<double>& y);

void write_episode_csv(std::ostream& out, const std::vector<EpisodeRow>& rows, const std::string& policy, int K,
                       int R, bool header);

}  // namespace lp2s
