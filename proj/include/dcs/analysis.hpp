#pragma once

// Checks and counterexample builders for the identifiability results:
// activation of invertibility by tensor powers, shared-kernel conspiracies,
// the insufficiency of pairwise mutual information, the K = 2 ambiguity,
// the conjunctive fork and the vanishing infimum of noisy hypothesis tests.

#include "dcs/rng.hpp"
#include "dcs/tensor_core.hpp"

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

namespace dcs {

/// The input violates a precondition of the construction or check.
class HypothesisViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kRankTol = 1e-9;

/// Number of singular values >= rel_tol * largest singular value.
std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankTol);

Eigen::MatrixXd to_matrix(const Channel& w);

/// L'^K x L matrix whose column i is the K-fold tensor power of W's column i.
Eigen::MatrixXd restricted_matrix(const Channel& w, std::size_t copies);

/// W^{(x)K} is injective on diagonal inputs p^(K). Throws HypothesisViolation
/// when two columns of W coincide within tol (max-norm).
bool activation_invertible(const Channel& w, std::size_t copies, double tol = kRankTol);

/// Smallest K <= max_copies with activation_invertible(W, K).
std::optional<std::size_t> min_activation_order(const Channel& w, std::size_t max_copies,
                                                double tol = kRankTol);

/// All channels have the same null space.
bool kernels_equal(const std::vector<Channel>& channels, double tol = kRankTol);

struct MiCounterexample {
  Channel channel;  ///< shared by all K agents; columns delta_1, delta_2, r, r
  DCSystem first;
  DCSystem second;  ///< same channel, p with its last two masses changed
};

/// Two hidden distributions over [4] that no observer of K outputs can tell
/// apart although every pair of outputs is correlated.
MiCounterexample mi_counterexample(const Distribution& r, std::size_t copies,
                                   const Distribution& p = Distribution({0.1, 0.2, 0.3, 0.4}));

/// Entry (i, j) = I(Y_i; Y_j) in bits; the diagonal holds H(Y_i).
Eigen::MatrixXd pairwise_mutual_information(const JointTensor& q);

double entropy(const JointTensor& t);

/// L^K >= K (L - 1) L + L.
bool parameter_count_feasible(std::size_t hidden_size, std::size_t copies);

struct K2Witness {
  DCSystem first;   ///< (p, [Id, r]): q(i, j) = p(i) r(j | i)
  DCSystem second;  ///< (r p, [r', Id]) with r'(i | j) = p(i) r(j | i) / (r p)(j)
  bool degenerate = false;  ///< hidden distributions closer than 1e-3 in L1
};

/// Two-output systems with identical output law. Requires p strictly
/// positive and r invertible (throws HypothesisViolation otherwise).
K2Witness k2_ambiguity_witness(const Distribution& p, const Channel& r);

/// Seeded variant: random strictly positive p and random invertible r over [L].
K2Witness k2_ambiguity_witness(std::size_t hidden_size, Seed seed);

/// Joint law of (C, Y_1..Y_K): (Id (x) W_1 (x) ... (x) W_K) p^(K+1).
JointTensor hidden_joint(const DCSystem& system);

/// Axis 0 holds the common cause; checks s(y | c) = prod_k s(y_k | c) for every
/// c with s(c) > 0, entrywise within tol.
bool conditionally_independent(const JointTensor& joint, double tol);

/// conditionally_independent(hidden_joint(system), tol). Requires K >= 2.
bool conjunctive_fork_check(const DCSystem& system, double tol = 1e-10);

/// (1 - t) * collapse-to-symbol-0 + t * identity.
Channel collapse_mixture(std::size_t size, double t);

/// D(W_t^{(x)K} r^(K) || W_t^{(x)K} s^(K)) for every t in t_values.
std::vector<double> vanishing_infimum_demo(const Distribution& r, const Distribution& s,
                                           std::size_t copies, const std::vector<double>& t_values);

}  // namespace dcs
