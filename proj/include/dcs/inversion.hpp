#pragma once

#include "dcs/rng.hpp"
#include "dcs/tensor_core.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcs {

enum class Objective { kl, l1, l2sq };

std::string_view to_string(Objective kind);
std::optional<Objective> parse_objective(std::string_view name);

struct InversionConfig {
  std::size_t hidden_size = 2;  ///< L, the hidden alphabet size to fit
  Objective objective = Objective::l2sq;
  std::size_t restarts = 32;
  std::size_t max_iters = 2000;  ///< full sweeps per restart
  double step_tol = 1e-10;       ///< max parameter change over one sweep
  double objective_tol = 1e-12;  ///< objective decrease over one sweep
  Seed seed = 0;
  double kl_smoothing = 1e-12;
  unsigned threads = 1;  ///< restarts run concurrently when > 1

  void validate() const;
};

struct RestartLog {
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct InversionResult {
  DCSystem system;  ///< (p_hat, channels_hat), canonicalized
  double objective_value = 0.0;
  bool converged = false;
  /// Some p_hat entry fell below 1e-6: the fitted L is likely too large.
  bool near_boundary = false;
  std::size_t best_restart = 0;
  std::vector<RestartLog> restarts = {};
  std::vector<std::string> warnings = {};

  const Distribution& p_hat() const { return system.p(); }
  const std::vector<Channel>& channels_hat() const { return system.channels(); }
};

/// Euclidean projection onto the probability simplex (sort-and-threshold).
Distribution project_simplex(std::span<const double> v);

/// Discrepancy between theta(system) and qhat:
///   kl   -> sum m log2((m + eps) / (qhat + eps)) over cells with m > 0
///   l1   -> ||m - qhat||_1
///   l2sq -> ||m - qhat||_2^2
double objective(const DCSystem& system, const JointTensor& qhat, Objective kind,
                 double kl_smoothing = 1e-12);

/// Fits (p, W_1..W_K) with |p| = config.hidden_size to qhat by multi-start
/// block-coordinate descent and returns the best restart, canonicalized.
InversionResult invert_theta(const JointTensor& qhat, const InversionConfig& config);

/// Objective value after every block update of a single restart. For kl and
/// l1 the trace has two segments, each non-increasing: the least-squares warm
/// start, then the refinement on the requested objective.
std::vector<double> descent_trace(const JointTensor& qhat, const InversionConfig& config,
                                  std::size_t restart);

/// Relabels the hidden alphabet so p is non-increasing. Equal masses are
/// ordered by their columns in channel 1, then channel 2, ..., compared
/// lexicographically with the larger column first.
DCSystem canonicalize(const DCSystem& system);

/// tau minimizing ||tau(p_est) - p_true||_1; ties go to the lexicographically
/// smallest map().
Permutation align_permutation(const Distribution& p_true, const Distribution& p_est);

}  // namespace dcs
