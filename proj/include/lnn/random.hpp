#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lnn {

// Seeded 64-bit generator with fixed uniform and Gaussian transforms, so the
// same seed produces the same numbers on every platform. The standard
// distribution classes are implementation-defined and are avoided here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(make_seq(seed, 0, false)) {}
  // Independent stream for (seed, index); used to shard per-sample generation.
  Rng(std::uint64_t seed, std::uint64_t index) : engine_(make_seq(seed, index, true)) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next_u64() { return engine_(); }

  // Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::mt19937_64 make_seq(std::uint64_t seed, std::uint64_t index, bool indexed) {
    if (!indexed) return std::mt19937_64(seed);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lnn
