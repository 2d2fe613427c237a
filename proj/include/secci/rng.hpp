#pragma once

#include <cstdint>
#include <random>

namespace secci {

// Seedable random source with a pinned algorithm so datasets regenerate
// identically from a seed: mt19937_64 core, 53-bit uniform doubles,
// Box-Muller normals, rejection-sampled integers. Child generators are
// derived by splitmix64-mixing the parent seed with an index, which keeps
// per-site streams independent of iteration order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }
  Rng child(std::uint64_t index) const { return Rng(mix(seed_, index)); }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] without modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double normal(double mean = 0.0, double stddev = 1.0);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace secci
