#include "lp2s/rng.hpp"

#include "lp2s/errors.hpp"

namespace lp2s {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t episode, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ episode) ^ (stream * 0xD1B54A32D192ED03ULL));
}

int Rng::below(int n) {
  if (n <= 0) throw InvalidArgument("Rng::below needs n >= 1");
  return std::uniform_int_distribution<int>(0, n - 1)(eng_);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw InvalidArgument("gamma shape must be positive");
  return std::gamma_distribution<double>(shape, 1.0)(eng_);
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  if (x + y == 0.0) return bernoulli(a / (a + b)) ? 1.0 : 0.0;  // both draws underflowed
  return x / (x + y);
}

}  // namespace lp2s
