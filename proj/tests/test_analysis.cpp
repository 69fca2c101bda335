#include "dcs/analysis.hpp"
#include "dcs/sampling.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace dcs;

namespace {

// Gaussian elimination with partial pivoting; independent of the SVD path.
std::size_t rank_by_elimination(Eigen::MatrixXd m, double tol = 1e-9) {
  std::size_t rank = 0;
  const auto rows = m.rows(), cols = m.cols();
  for (Eigen::Index c = 0; c < cols && static_cast<Eigen::Index>(rank) < rows; ++c) {
    Eigen::Index pivot = rank;
    for (Eigen::Index r = rank; r < rows; ++r) {
      if (std::abs(m(r, c)) > std::abs(m(pivot, c))) pivot = r;
    }
    if (std::abs(m(pivot, c)) <= tol) continue;
    m.row(pivot).swap(m.row(rank));
    for (Eigen::Index r = rank + 1; r < rows; ++r) m.row(r) -= m(r, c) / m(rank, c) * m.row(rank);
    ++rank;
  }
  return rank;
}

const Channel& three_column_example() {
  static const Channel w = Channel::from_columns({{1, 0}, {0, 1}, {0.5, 0.5}});
  return w;
}

Channel shared_kernel_channel(const Channel& u, const Channel& p) {
  std::vector<double> e(u.rows() * p.cols(), 0.0);
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      for (std::size_t m = 0; m < u.cols(); ++m) e[i * p.cols() + j] += u(i, m) * p(m, j);
    }
  }
  return Channel(u.rows(), p.cols(), e);
}

}  // namespace

TEST_CASE("restricted matrix") {
  const auto& w = three_column_example();
  CHECK(restricted_matrix(w, 1).isApprox(to_matrix(w)));
  const auto m = restricted_matrix(w, 2);
  REQUIRE(m.rows() == 4);
  REQUIRE(m.cols() == 3);
  Eigen::MatrixXd expect(4, 3);
  expect << 1, 0, 0.25, 0, 0, 0.25, 0, 0, 0.25, 0, 1, 0.25;
  CHECK(m.isApprox(expect));
  for (Eigen::Index j = 0; j < m.cols(); ++j) CHECK(m.col(j).sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(restricted_matrix(w, 0), ValidationError);
}

TEST_CASE("activation of the three-column example") {
  const auto& w = three_column_example();
  CHECK(rank_by_elimination(restricted_matrix(w, 1)) == 2);
  CHECK(rank_by_elimination(restricted_matrix(w, 2)) == 3);
  CHECK_FALSE(activation_invertible(w, 1));
  CHECK(activation_invertible(w, 2));
  CHECK(min_activation_order(w, 5) == 2u);
  CHECK(activation_invertible(Channel::identity(2), 1));
  CHECK(min_activation_order(Channel::identity(3), 5) == 1u);
}

TEST_CASE("duplicate columns violate the activation hypothesis") {
  const auto w = Channel::from_columns({{1, 0}, {0, 1}, {0, 1}});
  CHECK_THROWS_AS(activation_invertible(w, 2), HypothesisViolation);
  CHECK_THROWS_AS(min_activation_order(w, 5), HypothesisViolation);
}

TEST_CASE("four evenly spaced binary columns activate at order three") {
  const auto w = Channel::from_columns({{1, 0}, {2.0 / 3, 1.0 / 3}, {1.0 / 3, 2.0 / 3}, {0, 1}});
  std::size_t oracle = 0;
  for (std::size_t k = 1; k <= 5 && !oracle; ++k) {
    if (rank_by_elimination(restricted_matrix(w, k)) == 4) oracle = k;
  }
  CHECK(oracle == 3);
  CHECK(min_activation_order(w, 5) == oracle);
  CHECK_FALSE(min_activation_order(w, 2).has_value());
}

TEST_CASE("rank is monotone in the number of copies and reaches L at L - 1") {
  Rng rng(31);
  int tested = 0;
  while (tested < 40) {
    const std::size_t L = 2 + rng.below(4), Lp = 2 + rng.below(3);
    const auto w = random_channel(Lp, L, rng);
    std::size_t prev = 0;
    for (std::size_t k = 1; k <= L; ++k) {
      const auto r = numerical_rank(restricted_matrix(w, k));
      CHECK(r >= prev);
      CHECK(r == rank_by_elimination(restricted_matrix(w, k), 1e-12));
      prev = r;
    }
    CHECK(activation_invertible(w, L - 1));
    ++tested;
  }
}

TEST_CASE("kernels_equal") {
  Rng rng(4);
  const auto a = random_channel(2, 3, rng);
  CHECK(kernels_equal({a, a, a}));

  // V_k = U_k P with a shared P and invertible U_k.
  const auto p = random_channel(2, 3, rng);
  std::vector<Channel> shared;
  for (int k = 0; k < 3; ++k) shared.push_back(shared_kernel_channel(random_noisy_identity(2, 2, rng), p));
  CHECK(kernels_equal(shared));

  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_channel(2, 3, rng), y = random_channel(2, 3, rng);
    Eigen::MatrixXd stacked(4, 3);
    stacked << to_matrix(x), to_matrix(y);
    CHECK(rank_by_elimination(stacked) == 3);
    CHECK_FALSE(kernels_equal({x, y}));
    CHECK(kernels_equal({x, y}) == kernels_equal({y, x}));
  }

  // Left composition with invertible square channels keeps kernels.
  const auto b = random_channel(3, 3, rng), c = random_channel(3, 3, rng);
  const auto u = random_noisy_identity(3, 3, rng), v = random_noisy_identity(3, 3, rng);
  CHECK(kernels_equal({b, c}) == kernels_equal({shared_kernel_channel(u, b), shared_kernel_channel(v, c)}));

  CHECK_THROWS_AS(kernels_equal({a}), ValidationError);
  CHECK_THROWS_AS(kernels_equal({a, Channel::identity(3)}), ValidationError);
}

TEST_CASE("mutual information") {
  const Distribution a({0.3, 0.7}), b({0.6, 0.4}), c({0.1, 0.9});
  std::vector<double> prod;
  for (double x : a.vector())
    for (double y : b.vector())
      for (double z : c.vector()) prod.push_back(x * y * z);
  const auto mi = pairwise_mutual_information(JointTensor({2, 2, 2}, prod));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(std::abs(mi(i, j)) < 1e-12);
    }
  }
  // Entropy oracle for the first marginal.
  CHECK(mi(0, 0) == doctest::Approx(-(0.3 * std::log2(0.3) + 0.7 * std::log2(0.7))));

  const auto fair = pairwise_mutual_information(diag_embed(Distribution({0.5, 0.5}), 2));
  CHECK(fair(0, 1) == doctest::Approx(1.0));
  CHECK(fair(1, 0) == doctest::Approx(1.0));
  CHECK(entropy(as_tensor(Distribution::uniform(8))) == doctest::Approx(3.0));
}

TEST_CASE("mutual-information counterexample") {
  const auto cx = mi_counterexample(Distribution({0.5, 0.5}), 3);
  CHECK(cx.first.p().vector() == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(cx.second.p().vector() == std::vector<double>{0.1, 0.2, 0.4, 0.3});
  CHECK(cx.channel.column(0) == std::vector<double>{1, 0});
  CHECK(cx.channel.column(1) == std::vector<double>{0, 1});
  CHECK(cx.channel.column(2) == cx.channel.column(3));

  const auto q1 = theta(cx.first), q2 = theta(cx.second);
  // Oracle: 0.1 d1^3 + 0.2 d2^3 + 0.7 r^3.
  for (std::size_t f = 0; f < q1.size(); ++f) {
    const auto y = q1.unflatten(f);
    double oracle = 0.7 * 0.125;
    if (y == std::vector<std::size_t>{0, 0, 0}) oracle += 0.1;
    if (y == std::vector<std::size_t>{1, 1, 1}) oracle += 0.2;
    CHECK(q1.values()[f] == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(std::abs(q1.values()[f] - q2.values()[f]) <= 1e-15);
  }
  const auto mi = pairwise_mutual_information(q1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(mi(i, j) > 0.01);
    }
  }
  CHECK_THROWS_AS(mi_counterexample(Distribution({0.5, 0.5}), 1), ValidationError);
  CHECK_THROWS_AS(mi_counterexample(Distribution({0.5, 0.5}), 2, Distribution({0.5, 0.5})), ValidationError);
}

TEST_CASE("parameter counting") {
  CHECK(parameter_count_feasible(2, 3));
  CHECK_FALSE(parameter_count_feasible(2, 2));
  CHECK(parameter_count_feasible(5, 3));
  for (std::size_t L = 2; L <= 6; ++L) {
    for (std::size_t K = 1; K <= 8; ++K) {
      double lhs = std::pow(static_cast<double>(L), static_cast<double>(K));
      CHECK(parameter_count_feasible(L, K) == (lhs >= static_cast<double>(K * (L - 1) * L + L)));
    }
  }
  CHECK(parameter_count_feasible(2, 200));
  CHECK_THROWS_AS(parameter_count_feasible(1, 3), ValidationError);
}

TEST_CASE("two-output ambiguity witness") {
  const Distribution p({0.6, 0.4});
  const auto r = Channel(2, 2, {0.8, 0.1, 0.2, 0.9});
  const auto w = k2_ambiguity_witness(p, r);
  const auto q1 = theta(w.first), q2 = theta(w.second);
  for (std::size_t f = 0; f < q1.size(); ++f) CHECK(std::abs(q1.values()[f] - q2.values()[f]) <= 1e-12);
  // q(i, j) = p(i) r(j | i)
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(q1.values()[i * 2 + j] == doctest::Approx(p[i] * r(j, i)));
  }
  CHECK(lp_distance(w.first.p(), w.second.p(), 1) > 1e-3);
  CHECK_FALSE(w.degenerate);

  const auto sym = k2_ambiguity_witness(Distribution({0.5, 0.5}), Channel::identity(2));
  CHECK(sym.second.p().vector() == std::vector<double>{0.5, 0.5});
  CHECK(sym.degenerate);

  CHECK_THROWS_AS(k2_ambiguity_witness(Distribution({1, 0}), r), HypothesisViolation);
  CHECK_THROWS_AS(k2_ambiguity_witness(p, Channel(2, 2, {0.5, 0.5, 0.5, 0.5})), HypothesisViolation);

  for (Seed seed = 0; seed < 20; ++seed) {
    const auto s = k2_ambiguity_witness(2 + seed % 3, seed);
    CHECK(lp_distance(theta(s.first), theta(s.second), 1) < 1e-12);
    CHECK(lp_distance(s.first.p(), s.second.p(), 1) > 1e-3);
  }
}

TEST_CASE("conjunctive fork") {
  for (Seed seed = 0; seed < 20; ++seed) CHECK(conjunctive_fork_check(random_system(3, 2, 3, seed)));
  const DCSystem det(Distribution({0.2, 0.8}), {Channel::identity(2), Channel(2, 2, {0, 1, 1, 0})});
  CHECK(conjunctive_fork_check(det));

  const auto joint = hidden_joint(random_system(2, 2, 2, 3));
  CHECK(joint.shape() == std::vector<std::size_t>{2, 2, 2});
  CHECK(joint.is_distribution());

  // Hand-built leakage: given C = c, A and B are copies of a fair bit.
  const JointTensor leak({2, 2, 2}, {0.25, 0, 0, 0.25, 0.25, 0, 0, 0.25});
  // Direct conditional computation at c = 0.
  const double sc = leak.values()[0] + leak.values()[1] + leak.values()[2] + leak.values()[3];
  const double s_ab = leak.values()[0] / sc;
  const double s_a = (leak.values()[0] + leak.values()[1]) / sc;
  const double s_b = (leak.values()[0] + leak.values()[2]) / sc;
  CHECK(std::abs(s_ab - s_a * s_b) > 0.2);
  CHECK_FALSE(conditionally_independent(leak, 1e-10));

  CHECK_THROWS_AS(conjunctive_fork_check(DCSystem(Distribution({0.5, 0.5}), {Channel::identity(2)})),
                  ValidationError);
}

TEST_CASE("vanishing infimum") {
  const Distribution r({0.6, 0.4}), s({0.4, 0.6});
  const auto same = vanishing_infimum_demo(r, r, 3, {0.5, 0.1, 0.01});
  for (double v : same) CHECK(v == doctest::Approx(0.0));

  const auto d = vanishing_infimum_demo(r, s, 3, {0.5, 0.1, 0.01, 0.001});
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d[i] > 0.0);
    if (i) CHECK(d[i] < d[i - 1]);
  }

  // At t = 1 the channels are identities and diagonal supports reduce the
  // divergence to the single-letter one.
  const auto one = vanishing_infimum_demo(r, s, 3, {1.0});
  const double single = 0.6 * std::log2(0.6 / 0.4) + 0.4 * std::log2(0.4 / 0.6);
  CHECK(one[0] == doctest::Approx(single).epsilon(1e-12));

  // Direct oracle at t = 0.5, K = 1: W r = (0.8, 0.2), W s = (0.7, 0.3).
  const auto k1 = vanishing_infimum_demo(r, s, 1, {0.5});
  CHECK(k1[0] == doctest::Approx(0.8 * std::log2(0.8 / 0.7) + 0.2 * std::log2(0.2 / 0.3)));

  CHECK_THROWS_AS(vanishing_infimum_demo(r, s, 3, {0.0}), ValidationError);
  CHECK_THROWS_AS(vanishing_infimum_demo(r, s, 3, {1.5}), ValidationError);
  CHECK_THROWS_AS(vanishing_infimum_demo(Distribution({1, 0}), s, 3, {0.5}), ValidationError);

  CHECK(collapse_mixture(2, 0.5)(0, 1) == doctest::Approx(0.5));
  CHECK(channel_invertible(collapse_mixture(3, 0.01)));
}
