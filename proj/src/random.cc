#include "kvsched/random.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kvsched {

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw std::invalid_argument("empty integer range");
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next());  // full 64-bit range
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % span;
  uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return lo + static_cast<int64_t>(x % span);
}

int64_t Rng::poisson(double lambda) {
  if (lambda < 0) throw std::invalid_argument("negative Poisson rate");
  if (lambda == 0) return 0;
  const double u = uniform01();
  // Walk the CDF; for large rates split into chunks so exp(-lambda) stays
  // representable.
  if (lambda > 500) {
    const double half = lambda / 2;
    return poisson(half) + poisson(lambda - half);
  }
  double p = std::exp(-lambda);
  double cdf = p;
  int64_t k = 0;
  while (u >= cdf) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
    if (p == 0 && cdf <= u) break;  // numerical tail
  }
  return k;
}

double Rng::exponential(double rate) {
  if (rate <= 0) throw std::invalid_argument("exponential rate must be positive");
  return -std::log1p(-uniform01()) / rate;
}

double Rng::normal() {
  double u1 = uniform01();
  while (u1 <= 0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t Rng::mix(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace kvsched
