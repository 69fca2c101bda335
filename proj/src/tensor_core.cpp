#include "dcs/tensor_core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dcs {

namespace {

std::string describe_shape(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require_same_shape(const JointTensor& a, const JointTensor& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(who) + ": shape mismatch " + describe_shape(a.shape()) +
                          " vs " + describe_shape(b.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------- Distribution

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ValidationError("Distribution: empty alphabet");
  double sum = 0.0;
  for (double v : probs_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("Distribution: entries must be finite and nonnegative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kStochasticTol) {
    throw ValidationError("Distribution: entries sum to " + std::to_string(sum) + ", not 1");
  }
}

Distribution Distribution::uniform(std::size_t size) {
  if (size == 0) throw ValidationError("Distribution: empty alphabet");
  return Distribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

bool Distribution::strictly_positive() const {
  return std::all_of(probs_.begin(), probs_.end(), [](double v) { return v > 0.0; });
}

bool Distribution::strictly_descending() const {
  for (std::size_t i = 1; i < probs_.size(); ++i) {
    if (!(probs_[i - 1] > probs_[i])) return false;
  }
  return true;
}

// --------------------------------------------------------------------- Channel

Channel::Channel(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows_ == 0 || cols_ == 0) throw ValidationError("Channel: empty dimension");
  if (entries_.size() != rows_ * cols_) {
    throw ValidationError("Channel: expected " + std::to_string(rows_ * cols_) + " entries, got " +
                          std::to_string(entries_.size()));
  }
  for (double v : entries_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kStochasticTol) {
      throw ValidationError("Channel: entries must lie in [0, 1]");
    }
  }
  for (std::size_t j = 0; j < cols_; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) sum += entries_[i * cols_ + j];
    if (std::abs(sum - 1.0) > kStochasticTol) {
      throw ValidationError("Channel: column " + std::to_string(j) + " sums to " +
                            std::to_string(sum));
    }
  }
}

Channel Channel::identity(std::size_t size) {
  std::vector<double> e(size * size, 0.0);
  for (std::size_t i = 0; i < size; ++i) e[i * size + i] = 1.0;
  return Channel(size, size, std::move(e));
}

Channel Channel::from_columns(const std::vector<std::vector<double>>& columns) {
  if (columns.empty()) throw ValidationError("Channel: no columns");
  const std::size_t rows = columns.front().size();
  const std::size_t cols = columns.size();
  std::vector<double> e(rows * cols);
  for (std::size_t j = 0; j < cols; ++j) {
    if (columns[j].size() != rows) throw ValidationError("Channel: ragged columns");
    for (std::size_t i = 0; i < rows; ++i) e[i * cols + j] = columns[j][i];
  }
  return Channel(rows, cols, std::move(e));
}

std::vector<double> Channel::column(std::size_t in) const {
  std::vector<double> c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = entries_[i * cols_ + in];
  return c;
}

Distribution Channel::apply(const Distribution& p) const {
  if (p.size() != cols_) throw ValidationError("Channel::apply: input size mismatch");
  std::vector<double> out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out[i] += entries_[i * cols_ + j] * p[j];
  }
  return Distribution(std::move(out));
}

// ----------------------------------------------------------------- Permutation

Permutation::Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
  std::vector<bool> seen(map_.size(), false);
  for (std::size_t v : map_) {
    if (v >= map_.size() || seen[v]) throw ValidationError("Permutation: not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t size) {
  std::vector<std::size_t> m(size);
  std::iota(m.begin(), m.end(), std::size_t{0});
  return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
  return Permutation(std::move(inv));
}

Distribution Permutation::apply(const Distribution& p) const {
  if (p.size() != map_.size()) throw ValidationError("Permutation::apply: size mismatch");
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[map_[i]] = p[i];
  return Distribution(std::move(out));
}

std::vector<Permutation> all_permutations(std::size_t size) {
  std::vector<std::size_t> m(size);
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::vector<Permutation> out;
  do {
    out.emplace_back(m);
  } while (std::next_permutation(m.begin(), m.end()));
  return out;
}

// ----------------------------------------------------------------- JointTensor

JointTensor::JointTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty()) throw ValidationError("JointTensor: no axes");
  std::size_t n = 1;
  for (std::size_t s : shape_) {
    if (s == 0) throw ValidationError("JointTensor: zero-length axis");
    n *= s;
  }
  if (n != values_.size()) {
    throw ValidationError("JointTensor: shape " + describe_shape(shape_) + " needs " +
                          std::to_string(n) + " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("JointTensor: entries must be finite and nonnegative");
    }
  }
}

std::size_t JointTensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw ValidationError("JointTensor: index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t a = 0; a < shape_.size(); ++a) {
    if (index[a] >= shape_[a]) throw ValidationError("JointTensor: index out of range");
    flat = flat * shape_[a] + index[a];
  }
  return flat;
}

std::vector<std::size_t> JointTensor::unflatten(std::size_t flat) const {
  std::vector<std::size_t> index(shape_.size());
  for (std::size_t a = shape_.size(); a-- > 0;) {
    index[a] = flat % shape_[a];
    flat /= shape_[a];
  }
  return index;
}

double JointTensor::at(std::span<const std::size_t> index) const {
  return values_[flat_index(index)];
}

double JointTensor::total() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

bool JointTensor::is_distribution(double tol) const { return std::abs(total() - 1.0) <= tol; }

JointTensor as_tensor(const Distribution& p) { return JointTensor({p.size()}, p.vector()); }

Distribution as_distribution(const JointTensor& t) {
  if (t.rank() != 1) throw ValidationError("as_distribution: tensor has more than one axis");
  return Distribution(t.vector());
}

// -------------------------------------------------------------------- DCSystem

DCSystem::DCSystem(Distribution p, std::vector<Channel> channels)
    : p_(std::move(p)), channels_(std::move(channels)) {
  if (channels_.empty()) throw ValidationError("DCSystem: needs at least one channel");
  const std::size_t rows = channels_.front().rows();
  for (const auto& w : channels_) {
    if (w.cols() != p_.size()) {
      throw ValidationError("DCSystem: channel input size " + std::to_string(w.cols()) +
                            " does not match |p| = " + std::to_string(p_.size()));
    }
    if (w.rows() != rows) throw ValidationError("DCSystem: channels disagree on output size");
  }
}

// ------------------------------------------------------------------ operations

Distribution dirac(std::size_t index, std::size_t size) {
  if (index >= size) {
    throw ValidationError("dirac: index " + std::to_string(index) + " outside alphabet of size " +
                          std::to_string(size));
  }
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return Distribution(std::move(v));
}

JointTensor diag_embed(const Distribution& p, std::size_t copies) {
  if (copies < 1) throw ValidationError("diag_embed: need at least one copy");
  const std::size_t L = p.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < copies; ++k) total *= L;
  // Flat offset between consecutive diagonal cells: 1 + L + L^2 + ...
  std::size_t stride = 0;
  for (std::size_t k = 0, s = 1; k < copies; ++k, s *= L) stride += s;
  std::vector<double> values(total, 0.0);
  for (std::size_t i = 0; i < L; ++i) values[i * stride] = p[i];
  return JointTensor(std::vector<std::size_t>(copies, L), std::move(values));
}

JointTensor theta(const DCSystem& system) {
  const std::size_t L = system.hidden_size();
  const std::size_t Lp = system.output_size();
  const std::size_t K = system.agents();
  std::size_t total = 1;
  for (std::size_t k = 0; k < K; ++k) total *= Lp;

  std::vector<double> q(total, 0.0);
  std::vector<double> term;
  std::vector<double> next;
  term.reserve(total);
  next.reserve(total);
  for (std::size_t x = 0; x < L; ++x) {
    if (system.p()[x] == 0.0) continue;
    term.assign(1, system.p()[x]);
    for (std::size_t k = 0; k < K; ++k) {
      const Channel& w = system.channel(k);
      next.resize(term.size() * Lp);
      for (std::size_t a = 0; a < term.size(); ++a) {
        for (std::size_t y = 0; y < Lp; ++y) next[a * Lp + y] = term[a] * w(y, x);
      }
      term.swap(next);
    }
    for (std::size_t c = 0; c < total; ++c) q[c] += term[c];
  }
  return JointTensor(std::vector<std::size_t>(K, Lp), std::move(q));
}

JointTensor partial_trace(const JointTensor& t, std::span<const std::size_t> keep) {
  if (keep.empty()) throw ValidationError("partial_trace: keep set is empty");
  std::vector<bool> kept(t.rank(), false);
  for (std::size_t a : keep) {
    if (a >= t.rank()) throw ValidationError("partial_trace: axis out of range");
    kept[a] = true;
  }
  std::vector<std::size_t> out_shape;
  for (std::size_t a = 0; a < t.rank(); ++a) {
    if (kept[a]) out_shape.push_back(t.shape()[a]);
  }
  std::size_t out_size = 1;
  for (std::size_t s : out_shape) out_size *= s;

  std::vector<double> out(out_size, 0.0);
  std::vector<std::size_t> index(t.rank(), 0);
  const auto& shape = t.shape();
  const auto values = t.values();
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    std::size_t o = 0;
    for (std::size_t a = 0; a < t.rank(); ++a) {
      if (kept[a]) o = o * shape[a] + index[a];
    }
    out[o] += values[flat];
    // odometer increment, last axis fastest
    for (std::size_t a = t.rank(); a-- > 0;) {
      if (++index[a] < shape[a]) break;
      index[a] = 0;
    }
  }
  return JointTensor(std::move(out_shape), std::move(out));
}

JointTensor partial_trace(const JointTensor& t, std::initializer_list<std::size_t> keep) {
  return partial_trace(t, std::span<const std::size_t>(keep.begin(), keep.size()));
}

double kl_divergence(const JointTensor& a, const JointTensor& b) {
  require_same_shape(a, b, "kl_divergence");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a.values()[i];
    const double bi = b.values()[i];
    if (ai == 0.0) continue;
    if (bi == 0.0) return kInfinity;
    d += ai * std::log2(ai / bi);
  }
  return d;
}

double kl_divergence(const Distribution& a, const Distribution& b) {
  return kl_divergence(as_tensor(a), as_tensor(b));
}

double lp_distance(const JointTensor& a, const JointTensor& b, int order) {
  require_same_shape(a, b, "lp_distance");
  if (order != 1 && order != 2) throw ValidationError("lp_distance: order must be 1 or 2");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.values()[i] - b.values()[i]);
    acc += order == 1 ? d : d * d;
  }
  return order == 1 ? acc : std::sqrt(acc);
}

double lp_distance(const Distribution& a, const Distribution& b, int order) {
  return lp_distance(as_tensor(a), as_tensor(b), order);
}

DCSystem permute_system(const Permutation& tau, const DCSystem& system) {
  const std::size_t L = system.hidden_size();
  if (tau.size() != L) throw ValidationError("permute_system: permutation size mismatch");
  // Column j of W o tau^{-1} is column tau^{-1}(j) of W.
  const Permutation inv = tau.inverse();
  std::vector<Channel> channels;
  channels.reserve(system.agents());
  for (const auto& w : system.channels()) {
    std::vector<double> e(w.rows() * L);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < L; ++j) e[i * L + j] = w(i, inv(j));
    }
    channels.emplace_back(w.rows(), L, std::move(e));
  }
  return DCSystem(tau.apply(system.p()), std::move(channels));
}

std::vector<double> singular_values(const Channel& w) {
  Eigen::MatrixXd m(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) m(i, j) = w(i, j);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

bool channel_invertible(const Channel& w, double rel_tol) {
  if (w.rows() != w.cols()) throw ValidationError("channel_invertible: channel is not square");
  const auto s = singular_values(w);
  return s.back() > rel_tol * s.front();
}

}  // namespace dcs
