#pragma once

#include <cstdint>
#include <string_view>

namespace teamcredit {

// Deterministic PRNG built on splitmix64. The <random> engines are portable
// but the distribution objects are not, so sampling is implemented here and
// produces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform over {0, ..., n-1}; n must be positive.
  int uniform_int(int n);

  // Standard normal via Box-Muller. Pairs are drawn together and the
  // second value is cached, so the stream stays reproducible.
  double normal();

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Stable sub-stream seeds: hash the base seed together with a module tag or
// an index. Used so that e.g. episode k's stream does not depend on how many
// draws episode k-1 consumed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace teamcredit
