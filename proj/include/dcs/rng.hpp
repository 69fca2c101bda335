#pragma once

// Portable deterministic random numbers.
//
// The generator is SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter
// advanced by the golden-ratio increment 0x9E3779B97F4A7C15 and passed through
// a fixed avalanche mix. Its output depends only on integer arithmetic, so a
// given seed produces the same stream on every platform and compiler. Doubles
// are built from the top 53 bits, which keeps them bit-reproducible too.
//
// Independent streams are derived with `Rng::stream(seed, index)`: the state
// becomes mix(seed ^ mix(index + 1)). Record t of a sample batch and restart r
// of an inversion each use their own stream, so work can be split across
// threads without changing results.

#include <cstdint>
#include <vector>

namespace dcs {

using Seed = std::uint64_t;

class Rng {
 public:
  explicit Rng(Seed seed) : state_(seed) {}

  static Rng stream(Seed seed, std::uint64_t index);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Exponential(1), strictly positive.
  double exponential();
  /// Symmetric Dirichlet with unit concentration (uniform on the simplex).
  std::vector<double> dirichlet(std::size_t size);
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace dcs
