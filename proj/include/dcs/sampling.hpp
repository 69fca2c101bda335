#pragma once

#include "dcs/rng.hpp"
#include "dcs/tensor_core.hpp"

#include <cstdint>
#include <vector>

namespace dcs {

/// n observations of K output symbols, each 0-based in [0, L').
class SampleBatch {
 public:
  SampleBatch(std::size_t agents, std::size_t output_size, std::vector<std::uint32_t> symbols);

  std::size_t agents() const { return agents_; }
  std::size_t output_size() const { return output_size_; }
  std::size_t records() const { return symbols_.size() / agents_; }
  std::uint32_t symbol(std::size_t record, std::size_t agent) const {
    return symbols_[record * agents_ + agent];
  }
  std::span<const std::uint32_t> record(std::size_t t) const {
    return std::span<const std::uint32_t>(symbols_).subspan(t * agents_, agents_);
  }
  const std::vector<std::uint32_t>& symbols() const { return symbols_; }

  bool operator==(const SampleBatch&) const = default;

 private:
  std::size_t agents_;
  std::size_t output_size_;
  std::vector<std::uint32_t> symbols_;
};

/// N(. | y^n): occurrence count of every K-tuple, row-major over [L']^K.
struct EmpiricalCounts {
  std::vector<std::size_t> shape;
  std::vector<std::uint64_t> counts;
  std::uint64_t n = 0;
};

/// Draws n i.i.d. records: x ~ p, then y_k ~ W_k(. | x) independently.
/// Record t uses the stream Rng::stream(seed, t), so the result does not
/// depend on `threads` (0 selects default_thread_count()).
SampleBatch sample_dcs(const DCSystem& system, std::size_t n, Seed seed, unsigned threads = 0);

EmpiricalCounts type_counts(const SampleBatch& batch);

JointTensor ml_estimate(const EmpiricalCounts& counts);

/// Accepts qhat as typical for q when D(qhat || q) <= 1/sqrt(n).
bool typicality_test(const JointTensor& qhat, const JointTensor& q, std::size_t n);

/// Hardware concurrency, overridable with the DCS_THREADS environment variable.
unsigned default_thread_count();

/// Descending, strictly positive p whose entries are at least `min_mass`.
Distribution random_descending_distribution(std::size_t size, Rng& rng, double min_mass = 0.0);

/// Column j mixes the point mass at j mod L' (weight 1 - noise) with a
/// uniformly random column (weight noise). For L = L' and noise < 0.5 the
/// result is column diagonally dominant, hence invertible.
Channel random_noisy_identity(std::size_t output_size, std::size_t input_size, Rng& rng,
                              double noise = 0.3);

/// Columns drawn uniformly from the simplex.
Channel random_channel(std::size_t output_size, std::size_t input_size, Rng& rng);

/// The system written by `dcs gen`: p from random_descending_distribution
/// and K channels from random_noisy_identity with noise 0.3.
DCSystem random_system(std::size_t hidden_size, std::size_t output_size, std::size_t agents,
                       Seed seed, double min_mass = 0.0);

}  // namespace dcs
