#pragma once
// Seed derivation and the per-stream generator used by policies and the
// simulator.

#include <cstdint>
#include <random>

namespace lp2s {

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based seed for (master, episode, stream); independent of the order
// in which episodes are run.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t episode, std::uint64_t stream);

// Uniform in [0,1) from a 64-bit word.
inline double unit_from_bits(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::mt19937_64& engine() { return eng_; }

  double uniform() { return unit_from_bits(eng_()); }
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n).
  int below(int n);
  double beta(double a, double b);
  double gamma(double shape);

 private:
  std::mt19937_64 eng_;
};

}  // namespace lp2s
