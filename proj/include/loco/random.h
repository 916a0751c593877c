#pragma once

#include <cstdint>
#include <random>

namespace loco {

// Seeded random source. Uses only the bit stream of std::mt19937_64 (fully
// specified by the standard) so generated data is identical across
// standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer on [0, n). Unbiased (rejection on the top bits).
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform01() < p; }
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; derives independent stream seeds from (seed, tag).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace loco
