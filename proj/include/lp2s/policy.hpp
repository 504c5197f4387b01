#pragma once
// Batch policies under the (K,1) protocol: each batch pulls a set of
// distinct arms, then sees one 0/1 reward per pulled arm.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lp2s/lp_solve.hpp"
#include "lp2s/prior.hpp"
#include "lp2s/rng.hpp"

namespace lp2s {

struct ArmState {
  long pulls = 0;
  long successes = 0;
  bool eliminated = false;

  double mean() const { return pulls > 0 ? static_cast<double>(successes) / pulls : 0.0; }
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual int arms() const = 0;
  // True once the policy pulls nothing more; recommend() is then allowed.
  virtual bool finished() const = 0;
  // Arms to pull in the next batch. Only called while !finished().
  virtual std::vector<int> decide() = 0;
  // rewards[i] belongs to arms[i] of the last decide().
  virtual void observe(const std::vector<int>& arms, const std::vector<int>& rewards) = 0;
  virtual int recommend() = 0;
  virtual long pulls_used() const = 0;

  virtual long stage1_pulls() const { return pulls_used(); }
  virtual long stage2_pulls() const { return 0; }
  // Arms alive after the screening stage, or -1 when not applicable.
  virtual int survivors() const { return -1; }
};

// Index of the largest value, ties broken uniformly with rng. Entries with
// mask false are skipped; returns -1 when nothing is eligible.
int argmax_random_tie(const std::vector<double>& values, const std::vector<bool>& mask, Rng& rng);

// Per-state pull probabilities a(r,s) for r < R, by IndexMap::node_id.
struct ActionRule {
  int R = 0;
  std::vector<double> a;

  static ActionRule from(const ActionTable& table);
  static ActionRule from(const ThresholdPolicy& policy);
  double at(int r, int s) const { return a[IndexMap::node_id({r, s})]; }
};

std::unique_ptr<Policy> make_lp2s(const ActionRule& actions, int K, std::uint64_t seed);
std::unique_ptr<Policy> make_uniform(int K, int rounds, std::uint64_t seed);

struct RacingOptions {
  double delta = 0.05;
  int max_batches = 1000;
  long budget = -1;  // stop before a batch that would exceed it; -1 for none
};

// Anytime deviation sqrt(log(4 t^2 / omega) / (2 t)).
double racing_deviation(long t, double omega);

std::unique_ptr<Policy> make_batch_racing(int K, const RacingOptions& options, std::uint64_t seed);
std::unique_ptr<Policy> make_tse(int K, double q, long T, std::uint64_t seed);

struct ThompsonOptions {
  double alpha = 2.0;
  long budget = 0;
};

std::unique_ptr<Policy> make_batched_thompson(int K, const PriorSpec& prior, const ThompsonOptions& options,
                                              std::uint64_t seed);

}  // namespace lp2s
