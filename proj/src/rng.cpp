#include "dcs/rng.hpp"

#include <cmath>

namespace dcs {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::stream(Seed seed, std::uint64_t index) {
  return Rng(splitmix64_mix(seed ^ splitmix64_mix(index + 1)));
}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return splitmix64_mix(state_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::exponential() {
  // 1 - u lies in (0, 1], so the log is finite.
  double e = -std::log(1.0 - uniform());
  return e > 0.0 ? e : 0x1.0p-60;
}

std::vector<double> Rng::dirichlet(std::size_t size) {
  std::vector<double> v(size);
  double sum = 0.0;
  for (auto& x : v) {
    x = exponential();
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace dcs
