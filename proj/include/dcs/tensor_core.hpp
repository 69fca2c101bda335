#pragma once

// Probability and linear-algebra kernel for dependent component systems:
// a hidden distribution p over [L] observed through K channels.
//
// Conventions used throughout the library:
//   * indices are 0-based in memory (symbol 0 is the first letter);
//   * a Channel is an L'xL column-stochastic matrix stored row-major,
//     entry (i, j) = w(i | j), i.e. columns are indexed by the input;
//   * a JointTensor is stored flat with the LAST axis varying fastest.

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcs {

/// Raised when an input violates a stochasticity, shape or range contract.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kTensorSumTol = 1e-10;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class Distribution {
 public:
  /// Rejects (never renormalizes) vectors that are not on the simplex.
  explicit Distribution(std::vector<double> probs);

  static Distribution uniform(std::size_t size);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  const std::vector<double>& vector() const { return probs_; }

  bool strictly_positive() const;
  bool strictly_descending() const;

  bool operator==(const Distribution&) const = default;

 private:
  std::vector<double> probs_;
};

class Channel {
 public:
  /// `entries` is row-major: entries[i * cols + j] = w(i | j).
  Channel(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Channel identity(std::size_t size);
  /// Builds a channel whose j-th column is columns[j].
  static Channel from_columns(const std::vector<std::vector<double>>& columns);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t out, std::size_t in) const {
    return entries_[out * cols_ + in];
  }
  std::span<const double> entries() const { return entries_; }
  std::vector<double> column(std::size_t in) const;

  Distribution apply(const Distribution& p) const;

  bool operator==(const Channel&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

/// A bijection tau on {0..n-1}; map()[i] = tau(i).
class Permutation {
 public:
  explicit Permutation(std::vector<std::size_t> map);

  static Permutation identity(std::size_t size);

  std::size_t size() const { return map_.size(); }
  std::size_t operator()(std::size_t i) const { return map_[i]; }
  const std::vector<std::size_t>& map() const { return map_; }

  Permutation inverse() const;
  /// tau(p)(i) = p(tau^{-1}(i)).
  Distribution apply(const Distribution& p) const;

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<std::size_t> map_;
};

/// All n! permutations of {0..n-1} in lexicographic order of map().
std::vector<Permutation> all_permutations(std::size_t size);

class JointTensor {
 public:
  JointTensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  double at(std::span<const std::size_t> index) const;
  std::size_t flat_index(std::span<const std::size_t> index) const;
  /// Inverse of flat_index.
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  double total() const;
  bool is_distribution(double tol = kTensorSumTol) const;

  bool operator==(const JointTensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

JointTensor as_tensor(const Distribution& p);
/// Requires a single-axis tensor that is a valid distribution.
Distribution as_distribution(const JointTensor& t);

class DCSystem {
 public:
  DCSystem(Distribution p, std::vector<Channel> channels);

  const Distribution& p() const { return p_; }
  const std::vector<Channel>& channels() const { return channels_; }
  const Channel& channel(std::size_t k) const { return channels_[k]; }

  std::size_t hidden_size() const { return p_.size(); }
  std::size_t output_size() const { return channels_.front().rows(); }
  std::size_t agents() const { return channels_.size(); }

  bool operator==(const DCSystem&) const = default;

 private:
  Distribution p_;
  std::vector<Channel> channels_;
};

Distribution dirac(std::size_t index, std::size_t size);

/// p^(K): mass p(i) on the diagonal cell (i, ..., i).
JointTensor diag_embed(const Distribution& p, std::size_t copies);

/// Joint output law q(y_1..y_K) = sum_x p(x) prod_k w_k(y_k | x).
JointTensor theta(const DCSystem& system);

/// Sums out every axis not listed in `keep`; kept axes stay in ascending order.
JointTensor partial_trace(const JointTensor& t, std::span<const std::size_t> keep);
JointTensor partial_trace(const JointTensor& t, std::initializer_list<std::size_t> keep);

/// D(a || b) in bits; +inf when supp(a) is not contained in supp(b).
double kl_divergence(const JointTensor& a, const JointTensor& b);
double kl_divergence(const Distribution& a, const Distribution& b);

/// (sum |a - b|^order)^(1/order), order in {1, 2}.
double lp_distance(const JointTensor& a, const JointTensor& b, int order);
double lp_distance(const Distribution& a, const Distribution& b, int order);

/// (tau(p), [W_k o tau^{-1}]); leaves theta unchanged.
DCSystem permute_system(const Permutation& tau, const DCSystem& system);

std::vector<double> singular_values(const Channel& w);

/// sigma_min > rel_tol * sigma_max. Requires a square channel.
bool channel_invertible(const Channel& w, double rel_tol = 1e-9);

}  // namespace dcs
