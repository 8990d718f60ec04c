#pragma once

#include <cmath>
#include <cstdint>

namespace segsca {

// Deterministic RNG used for every random draw in the project. splitmix64
// keeps results identical across platforms and worker counts; std::random
// distributions are avoided because their output is implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent stream for (master seed, counter). Used to give each
  // bootstrap replication / synthetic area its own stream so results do not
  // depend on execution order.
  // The returned generator is re-seeded with an avalanche-mixed output:
  // seeding at master + k*gamma and advancing would leave consecutive
  // counters on the generator's own state lattice, making their streams
  // identical up to a one-draw shift.
  static Rng stream(std::uint64_t master, std::uint64_t counter) {
    Rng mix(master + 0x9e3779b97f4a7c15ULL * (counter + 1));
    return Rng(mix.next_u64());
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased enough for n << 2^64 (fixed-point multiply, no rejection loop,
  // so the draw count per replication is constant).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace segsca
