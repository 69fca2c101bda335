#include "dcs/analysis.hpp"

#include "dcs/sampling.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace dcs {

std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] >= rel_tol * s[0]) ++rank;
  }
  return rank;
}

Eigen::MatrixXd to_matrix(const Channel& w) {
  Eigen::MatrixXd m(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) m(i, j) = w(i, j);
  }
  return m;
}

Eigen::MatrixXd restricted_matrix(const Channel& w, std::size_t copies) {
  if (copies < 1) throw ValidationError("restricted_matrix: need at least one copy");
  const std::size_t Lp = w.rows();
  std::size_t rows = 1;
  for (std::size_t k = 0; k < copies; ++k) rows *= Lp;
  Eigen::MatrixXd out(rows, w.cols());
  std::vector<double> term, next;
  for (std::size_t x = 0; x < w.cols(); ++x) {
    term.assign(1, 1.0);
    for (std::size_t k = 0; k < copies; ++k) {
      next.resize(term.size() * Lp);
      for (std::size_t a = 0; a < term.size(); ++a) {
        for (std::size_t y = 0; y < Lp; ++y) next[a * Lp + y] = term[a] * w(y, x);
      }
      term.swap(next);
    }
    for (std::size_t c = 0; c < rows; ++c) out(c, x) = term[c];
  }
  return out;
}

namespace {

void require_distinct_columns(const Channel& w, double tol) {
  for (std::size_t a = 0; a < w.cols(); ++a) {
    for (std::size_t b = a + 1; b < w.cols(); ++b) {
      double diff = 0.0;
      for (std::size_t i = 0; i < w.rows(); ++i) diff = std::max(diff, std::abs(w(i, a) - w(i, b)));
      if (diff <= tol) {
        throw HypothesisViolation("channel columns " + std::to_string(a) + " and " +
                                  std::to_string(b) + " coincide");
      }
    }
  }
}

}  // namespace

bool activation_invertible(const Channel& w, std::size_t copies, double tol) {
  require_distinct_columns(w, tol);
  return numerical_rank(restricted_matrix(w, copies), tol) == w.cols();
}

std::optional<std::size_t> min_activation_order(const Channel& w, std::size_t max_copies,
                                                double tol) {
  require_distinct_columns(w, tol);
  for (std::size_t k = 1; k <= max_copies; ++k) {
    if (numerical_rank(restricted_matrix(w, k), tol) == w.cols()) return k;
  }
  return std::nullopt;
}

bool kernels_equal(const std::vector<Channel>& channels, double tol) {
  if (channels.size() < 2) throw ValidationError("kernels_equal: need at least two channels");
  const std::size_t rows = channels.front().rows();
  const std::size_t cols = channels.front().cols();
  std::vector<Eigen::MatrixXd> mats;
  std::vector<std::size_t> ranks;
  for (const auto& w : channels) {
    if (w.rows() != rows || w.cols() != cols) {
      throw ValidationError("kernels_equal: channels differ in dimension");
    }
    mats.push_back(to_matrix(w));
    ranks.push_back(numerical_rank(mats.back(), tol));
  }
  for (std::size_t a = 0; a < mats.size(); ++a) {
    for (std::size_t b = a + 1; b < mats.size(); ++b) {
      if (ranks[a] != ranks[b]) return false;
      Eigen::MatrixXd stacked(2 * rows, cols);
      stacked << mats[a], mats[b];
      // ker A = ker B iff the row spaces agree iff stacking adds no rank.
      if (numerical_rank(stacked, tol) != ranks[a]) return false;
    }
  }
  return true;
}

MiCounterexample mi_counterexample(const Distribution& r, std::size_t copies,
                                   const Distribution& p) {
  if (r.size() < 2) throw ValidationError("mi_counterexample: output alphabet needs >= 2 letters");
  if (copies < 2) throw ValidationError("mi_counterexample: need at least two outputs");
  if (p.size() != 4) throw ValidationError("mi_counterexample: hidden alphabet must have 4 letters");

  const std::size_t Lp = r.size();
  const auto rv = r.vector();
  Channel w = Channel::from_columns(
      {dirac(0, Lp).vector(), dirac(1, Lp).vector(), rv, rv});

  std::vector<double> alt = p.vector();
  if (alt[2] != alt[3]) {
    std::swap(alt[2], alt[3]);
  } else {
    const double tail = alt[2] + alt[3];
    alt[2] = 0.25 * tail;
    alt[3] = tail - alt[2];
  }
  std::vector<Channel> channels(copies, w);
  DCSystem first(p, channels);
  DCSystem second(Distribution(std::move(alt)), channels);
  return {std::move(w), std::move(first), std::move(second)};
}

double entropy(const JointTensor& t) {
  double h = 0.0;
  for (double v : t.values()) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

Eigen::MatrixXd pairwise_mutual_information(const JointTensor& q) {
  if (!q.is_distribution()) throw ValidationError("pairwise_mutual_information: q is not normalized");
  const std::size_t K = q.rank();
  std::vector<JointTensor> marginals;
  for (std::size_t k = 0; k < K; ++k) marginals.push_back(partial_trace(q, {k}));

  Eigen::MatrixXd mi = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t i = 0; i < K; ++i) {
    mi(i, i) = entropy(marginals[i]);
    for (std::size_t j = i + 1; j < K; ++j) {
      const JointTensor pair = partial_trace(q, {i, j});
      const std::size_t nj = pair.shape()[1];
      double v = 0.0;
      for (std::size_t a = 0; a < pair.shape()[0]; ++a) {
        for (std::size_t b = 0; b < nj; ++b) {
          const double joint = pair.values()[a * nj + b];
          if (joint > 0.0) {
            v += joint * std::log2(joint / (marginals[i].values()[a] * marginals[j].values()[b]));
          }
        }
      }
      mi(i, j) = mi(j, i) = std::max(v, 0.0);
    }
  }
  return mi;
}

bool parameter_count_feasible(std::size_t hidden_size, std::size_t copies) {
  if (hidden_size < 2 || copies < 1) {
    throw ValidationError("parameter_count_feasible: need L >= 2 and K >= 1");
  }
  const std::uint64_t L = hidden_size;
  const std::uint64_t needed = copies * (L - 1) * L + L;
  std::uint64_t power = 1;
  for (std::size_t k = 0; k < copies; ++k) {
    power *= L;
    if (power >= needed) return true;
  }
  return false;
}

K2Witness k2_ambiguity_witness(const Distribution& p, const Channel& r) {
  const std::size_t L = p.size();
  if (!p.strictly_positive()) throw HypothesisViolation("k2_ambiguity_witness: p must be positive");
  if (r.rows() != L || r.cols() != L) throw ValidationError("k2_ambiguity_witness: r must be LxL");
  if (!channel_invertible(r)) throw HypothesisViolation("k2_ambiguity_witness: r is not invertible");

  const Distribution mixed = r.apply(p);
  std::vector<double> reverse(L * L);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) reverse[i * L + j] = p[i] * r(j, i) / mixed[j];
  }
  // Read the other way round, q(i, j) = (r p)(j) r'(i | j).
  K2Witness out{DCSystem(p, {Channel::identity(L), r}),
                DCSystem(mixed, {Channel(L, L, std::move(reverse)), Channel::identity(L)})};
  out.degenerate = lp_distance(out.first.p(), out.second.p(), 1) < 1e-3;
  return out;
}

K2Witness k2_ambiguity_witness(std::size_t hidden_size, Seed seed) {
  Rng rng(seed);
  Distribution p = random_descending_distribution(hidden_size, rng, 0.05 / hidden_size);
  for (;;) {
    Channel r = random_channel(hidden_size, hidden_size, rng);
    if (channel_invertible(r, 1e-3)) return k2_ambiguity_witness(p, r);
  }
}

JointTensor hidden_joint(const DCSystem& system) {
  const std::size_t L = system.hidden_size();
  const std::size_t Lp = system.output_size();
  std::vector<std::size_t> shape{L};
  std::size_t rest = 1;
  for (std::size_t k = 0; k < system.agents(); ++k) {
    shape.push_back(Lp);
    rest *= Lp;
  }
  // Slice x of the joint is p(x) times the output law given C = x.
  std::vector<double> values(L * rest, 0.0);
  for (std::size_t x = 0; x < L; ++x) {
    const JointTensor given = theta(DCSystem(dirac(x, L), system.channels()));
    for (std::size_t c = 0; c < rest; ++c) values[x * rest + c] = system.p()[x] * given.values()[c];
  }
  return JointTensor(std::move(shape), std::move(values));
}

bool conditionally_independent(const JointTensor& joint, double tol) {
  if (joint.rank() < 3) {
    throw ValidationError("conditionally_independent: need a cause axis and two outputs");
  }
  const std::size_t causes = joint.shape()[0];
  const std::size_t rest = joint.size() / causes;
  std::vector<std::size_t> out_shape(joint.shape().begin() + 1, joint.shape().end());
  for (std::size_t c = 0; c < causes; ++c) {
    const auto slice = joint.values().subspan(c * rest, rest);
    double mass = 0.0;
    for (double v : slice) mass += v;
    if (mass <= 0.0) continue;
    std::vector<double> cond(slice.begin(), slice.end());
    for (auto& v : cond) v /= mass;
    const JointTensor conditional(out_shape, cond);
    std::vector<JointTensor> marginals;
    for (std::size_t k = 0; k < out_shape.size(); ++k) {
      marginals.push_back(partial_trace(conditional, {k}));
    }
    for (std::size_t flat = 0; flat < rest; ++flat) {
      const auto index = conditional.unflatten(flat);
      double product = 1.0;
      for (std::size_t k = 0; k < index.size(); ++k) product *= marginals[k].values()[index[k]];
      if (std::abs(cond[flat] - product) > tol) return false;
    }
  }
  return true;
}

bool conjunctive_fork_check(const DCSystem& system, double tol) {
  if (system.agents() < 2) throw ValidationError("conjunctive_fork_check: need K >= 2");
  return conditionally_independent(hidden_joint(system), tol);
}

Channel collapse_mixture(std::size_t size, double t) {
  std::vector<double> e(size * size, 0.0);
  for (std::size_t j = 0; j < size; ++j) {
    e[j] += 1.0 - t;  // row 0
    e[j * size + j] += t;
  }
  return Channel(size, size, std::move(e));
}

std::vector<double> vanishing_infimum_demo(const Distribution& r, const Distribution& s,
                                           std::size_t copies,
                                           const std::vector<double>& t_values) {
  if (r.size() != s.size()) throw ValidationError("vanishing_infimum_demo: alphabet mismatch");
  if (!r.strictly_positive() || !s.strictly_positive()) {
    throw ValidationError("vanishing_infimum_demo: r and s must be strictly positive");
  }
  if (copies < 1) throw ValidationError("vanishing_infimum_demo: need at least one copy");
  std::vector<double> out;
  for (double t : t_values) {
    if (!(t > 0.0) || t > 1.0) {
      throw ValidationError("vanishing_infimum_demo: t must lie in (0, 1]");
    }
    const Channel w = collapse_mixture(r.size(), t);
    if (!channel_invertible(w)) {
      throw HypothesisViolation("vanishing_infimum_demo: channel not invertible at t");
    }
    const std::vector<Channel> channels(copies, w);
    out.push_back(kl_divergence(theta(DCSystem(r, channels)), theta(DCSystem(s, channels))));
  }
  return out;
}

}  // namespace dcs
