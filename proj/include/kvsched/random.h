#pragma once

#include <cstdint>
#include <random>

namespace kvsched {

// mt19937_64 is fully specified by the standard, but the std distributions
// are not, so every sampler here is written out to keep streams identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer on [lo, hi] by rejection, no modulo bias.
  int64_t uniform_int(int64_t lo, int64_t hi);

  double uniform_real(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Inverse transform on the Poisson CDF.
  int64_t poisson(double lambda);

  // Inverse transform: -log(1-u)/rate.
  double exponential(double rate);

  // Box-Muller, one draw per call (the partner value is discarded).
  double normal();

  // Derive an independent child seed; splitmix64 finalizer.
  static uint64_t mix(uint64_t seed, uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace kvsched
