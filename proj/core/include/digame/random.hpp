#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace digame {

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard; the distributions below are hand-rolled so draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  // Box-Muller; the spare variate is discarded to keep the stream simple.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace digame
