#ifndef OTLOSS_RNG_HPP_
#define OTLOSS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace otloss {

// splitmix64 mixing step, used to derive substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combines a base seed with up to two stream indices. Experiment drivers give
// every independent work unit (cell, repeat, model) its own derived seed, so
// parallel and serial execution consume identical streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ substream);
}

// Deterministic generator: mt19937_64 with hand-rolled output maps. The
// standard <random> distributions are implementation-defined, these maps are
// not, so seeded streams reproduce bit for bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Marsaglia polar method; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double a, b, s;
    do {
      a = 2.0 * uniform() - 1.0;
      b = 2.0 * uniform() - 1.0;
      s = a * a + b * b;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = b * scale;
    has_spare_ = true;
    return a * scale;
  }

  double normal(double mean, double stdev) { return mean + stdev * normal(); }

  // Unbiased integer in [0, n); rejection sampling from the top of the range.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace otloss

#endif  // OTLOSS_RNG_HPP_
