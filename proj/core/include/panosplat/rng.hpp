#pragma once

#include <cstdint>
#include <random>

namespace panosplat {

/// Deterministic RNG. mt19937_64 engine with hand-rolled distributions so the
/// produced streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return (eng_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal(double mean = 0.0, double std = 1.0);

  uint64_t next_u64() { return eng_(); }

  /// Uniform integer in [0, n). Rejection-sampled, unbiased.
  uint64_t uniform_int(uint64_t n);

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a base seed with a stream id (splitmix64 finalizer).
uint64_t mix_seed(uint64_t seed, uint64_t stream);

}  // namespace panosplat
