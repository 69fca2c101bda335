#include "dcs/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <string_view>
#include <thread>

namespace dcs {

namespace {

// Inverse-CDF table for one distribution over a small alphabet.
class CdfTable {
 public:
  explicit CdfTable(std::span<const double> probs) : cdf_(probs.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf_[i] = acc;
      if (probs[i] > 0.0) last_positive_ = i;
    }
  }

  std::uint32_t draw(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.begin() + last_positive_ + 1, u);
    // u can exceed the rounded total by an ulp; fall back to the last atom.
    const auto i = static_cast<std::size_t>(it - cdf_.begin());
    return static_cast<std::uint32_t>(std::min(i, last_positive_));
  }

 private:
  std::vector<double> cdf_;
  std::size_t last_positive_ = 0;
};

}  // namespace

SampleBatch::SampleBatch(std::size_t agents, std::size_t output_size,
                         std::vector<std::uint32_t> symbols)
    : agents_(agents), output_size_(output_size), symbols_(std::move(symbols)) {
  if (agents_ == 0 || output_size_ == 0) throw ValidationError("SampleBatch: empty dimension");
  if (symbols_.size() % agents_ != 0) throw ValidationError("SampleBatch: ragged records");
  for (auto s : symbols_) {
    if (s >= output_size_) throw ValidationError("SampleBatch: symbol out of range");
  }
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("DCS_THREADS")) {
    unsigned v = 0;
    std::string_view sv(env);
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec == std::errc() && ptr == sv.data() + sv.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SampleBatch sample_dcs(const DCSystem& system, std::size_t n, Seed seed, unsigned threads) {
  if (n < 1) throw ValidationError("sample_dcs: need at least one record");
  const std::size_t L = system.hidden_size();
  const std::size_t K = system.agents();

  const CdfTable hidden(system.p().probs());
  std::vector<CdfTable> columns;
  columns.reserve(K * L);
  for (const auto& w : system.channels()) {
    for (std::size_t x = 0; x < L; ++x) columns.emplace_back(w.column(x));
  }

  std::vector<std::uint32_t> symbols(n * K);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      Rng rng = Rng::stream(seed, t);
      const std::uint32_t x = hidden.draw(rng.uniform());
      for (std::size_t k = 0; k < K; ++k) {
        symbols[t * K + k] = columns[k * L + x].draw(rng.uniform());
      }
    }
  };

  if (threads == 0) threads = default_thread_count();
  const std::size_t workers = std::min<std::size_t>(threads, (n + 4095) / 4096);
  if (workers <= 1) {
    fill(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(fill, b, e);
    }
  }
  return SampleBatch(K, system.output_size(), std::move(symbols));
}

EmpiricalCounts type_counts(const SampleBatch& batch) {
  const std::size_t K = batch.agents();
  const std::size_t Lp = batch.output_size();
  std::size_t cells = 1;
  for (std::size_t k = 0; k < K; ++k) cells *= Lp;

  EmpiricalCounts c;
  c.shape.assign(K, Lp);
  c.counts.assign(cells, 0);
  c.n = batch.records();
  for (std::size_t t = 0; t < batch.records(); ++t) {
    std::size_t flat = 0;
    for (auto s : batch.record(t)) flat = flat * Lp + s;
    ++c.counts[flat];
  }
  return c;
}

JointTensor ml_estimate(const EmpiricalCounts& counts) {
  if (counts.n == 0) throw ValidationError("ml_estimate: no observations");
  std::uint64_t sum = 0;
  for (auto c : counts.counts) sum += c;
  if (sum != counts.n) throw ValidationError("ml_estimate: counts do not sum to n");
  std::vector<double> v(counts.counts.size());
  const double n = static_cast<double>(counts.n);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(counts.counts[i]) / n;
  return JointTensor(counts.shape, std::move(v));
}

bool typicality_test(const JointTensor& qhat, const JointTensor& q, std::size_t n) {
  if (n < 1) throw ValidationError("typicality_test: n must be positive");
  return kl_divergence(qhat, q) <= 1.0 / std::sqrt(static_cast<double>(n));
}

Distribution random_descending_distribution(std::size_t size, Rng& rng, double min_mass) {
  if (size == 0) throw ValidationError("random_descending_distribution: empty alphabet");
  const double free_mass = 1.0 - static_cast<double>(size) * min_mass;
  if (min_mass < 0.0 || free_mass <= 0.0) {
    throw ValidationError("random_descending_distribution: min_mass too large");
  }
  auto v = rng.dirichlet(size);
  for (auto& x : v) x = min_mass + free_mass * x;
  std::sort(v.begin(), v.end(), std::greater<>());
  return Distribution(std::move(v));
}

Channel random_noisy_identity(std::size_t output_size, std::size_t input_size, Rng& rng,
                              double noise) {
  std::vector<std::vector<double>> cols(input_size);
  for (std::size_t j = 0; j < input_size; ++j) {
    auto c = rng.dirichlet(output_size);
    for (auto& x : c) x *= noise;
    c[j % output_size] += 1.0 - noise;
    cols[j] = std::move(c);
  }
  return Channel::from_columns(cols);
}

Channel random_channel(std::size_t output_size, std::size_t input_size, Rng& rng) {
  std::vector<std::vector<double>> cols(input_size);
  for (auto& c : cols) c = rng.dirichlet(output_size);
  return Channel::from_columns(cols);
}

DCSystem random_system(std::size_t hidden_size, std::size_t output_size, std::size_t agents,
                       Seed seed, double min_mass) {
  if (hidden_size < 1 || output_size < 1 || agents < 1) {
    throw ValidationError("random_system: sizes must be positive");
  }
  Rng rng(seed);
  Distribution p = random_descending_distribution(hidden_size, rng, min_mass);
  std::vector<Channel> channels;
  for (std::size_t k = 0; k < agents; ++k) {
    channels.push_back(random_noisy_identity(output_size, hidden_size, rng));
  }
  return DCSystem(std::move(p), std::move(channels));
}

}  // namespace dcs
