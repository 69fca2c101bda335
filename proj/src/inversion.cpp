#include "dcs/inversion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numbers>
#include <thread>

#include <Eigen/Dense>

namespace dcs {

std::string_view to_string(Objective kind) {
  switch (kind) {
    case Objective::kl: return "kl";
    case Objective::l1: return "l1";
    case Objective::l2sq: return "l2sq";
  }
  return "?";
}

std::optional<Objective> parse_objective(std::string_view name) {
  if (name == "kl") return Objective::kl;
  if (name == "l1") return Objective::l1;
  if (name == "l2sq") return Objective::l2sq;
  return std::nullopt;
}

void InversionConfig::validate() const {
  if (hidden_size < 1) throw ValidationError("InversionConfig: L must be at least 1");
  if (restarts < 1) throw ValidationError("InversionConfig: restarts must be at least 1");
  if (max_iters < 1) throw ValidationError("InversionConfig: max_iters must be at least 1");
  if (!(step_tol > 0.0) || !(objective_tol > 0.0)) {
    throw ValidationError("InversionConfig: tolerances must be positive");
  }
  if (!(kl_smoothing >= 0.0)) throw ValidationError("InversionConfig: negative smoothing");
}

// ---------------------------------------------------------------- projection

namespace {

// Writes the projection of v onto the simplex into out (same length).
void project_simplex_into(std::span<const double> v, std::span<double> out,
                          std::vector<double>& scratch) {
  scratch.assign(v.begin(), v.end());
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double cumsum = 0.0;
  double shift = 0.0;
  for (std::size_t j = 0; j < scratch.size(); ++j) {
    cumsum += scratch[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (scratch[j] - candidate > 0.0) shift = candidate;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i] - shift, 0.0);
    sum += out[i];
  }
  // Pull the rounding residue back onto the simplex.
  for (auto& x : out) x /= sum;
}

}  // namespace

Distribution project_simplex(std::span<const double> v) {
  if (v.empty()) throw ValidationError("project_simplex: empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("project_simplex: non-finite entry");
  }
  std::vector<double> out(v.size());
  std::vector<double> scratch;
  project_simplex_into(v, out, scratch);
  return Distribution(std::move(out));
}

// ------------------------------------------------------------------ objective

namespace {

double loss(std::span<const double> m, std::span<const double> q, Objective kind, double eps) {
  double f = 0.0;
  switch (kind) {
    case Objective::l2sq:
      for (std::size_t c = 0; c < m.size(); ++c) f += (m[c] - q[c]) * (m[c] - q[c]);
      break;
    case Objective::l1:
      for (std::size_t c = 0; c < m.size(); ++c) f += std::abs(m[c] - q[c]);
      break;
    case Objective::kl:
      for (std::size_t c = 0; c < m.size(); ++c) {
        if (m[c] > 0.0) f += m[c] * std::log2((m[c] + eps) / (q[c] + eps));
      }
      break;
  }
  return f;
}

void loss_gradient(std::span<const double> m, std::span<const double> q, Objective kind,
                   double eps, std::vector<double>& g) {
  g.resize(m.size());
  switch (kind) {
    case Objective::l2sq:
      for (std::size_t c = 0; c < m.size(); ++c) g[c] = 2.0 * (m[c] - q[c]);
      break;
    case Objective::l1:
      for (std::size_t c = 0; c < m.size(); ++c) {
        g[c] = m[c] > q[c] ? 1.0 : (m[c] < q[c] ? -1.0 : 0.0);
      }
      break;
    case Objective::kl:
      for (std::size_t c = 0; c < m.size(); ++c) {
        // d/dm [m log((m+eps)/(q+eps))]; finite at m = 0 when eps > 0.
        const double mm = std::max(m[c], 0.0);
        const double ratio = (mm + eps) / (q[c] + eps);
        const double log_term = ratio > 0.0 ? std::log(ratio) : -745.0;
        const double frac = mm + eps > 0.0 ? mm / (mm + eps) : 1.0;
        g[c] = (log_term + frac) / std::numbers::ln2;
      }
      break;
  }
}

}  // namespace

double objective(const DCSystem& system, const JointTensor& qhat, Objective kind,
                 double kl_smoothing) {
  const JointTensor m = theta(system);
  if (m.shape() != qhat.shape()) throw ValidationError("objective: shape mismatch");
  return loss(m.values(), qhat.values(), kind, kl_smoothing);
}

// -------------------------------------------------------------------- descent

namespace {

// Working parameters of one restart. Channels are row-major L' x L.
struct Params {
  std::size_t L = 0;
  std::size_t Lp = 0;
  std::size_t K = 0;
  std::vector<double> p;
  std::vector<std::vector<double>> w;
};

class Fitter {
 public:
  Fitter(const JointTensor& qhat, const InversionConfig& config)
      : q_(qhat.values()), config_(config), K_(qhat.rank()), Lp_(qhat.shape().front()),
        L_(config.hidden_size) {
    cells_ = q_.size();
  }

  Params initial(std::size_t restart) const {
    Rng rng = Rng::stream(config_.seed, restart);
    Params s;
    s.L = L_;
    s.Lp = Lp_;
    s.K = K_;
    s.p = rng.dirichlet(L_);
    s.w.resize(K_);
    for (auto& w : s.w) {
      w.assign(Lp_ * L_, 0.0);
      const double noise = 0.1 + 0.5 * rng.uniform();
      for (std::size_t x = 0; x < L_; ++x) {
        const auto col = rng.dirichlet(Lp_);
        for (std::size_t y = 0; y < Lp_; ++y) w[y * L_ + x] = noise * col[y];
        w[(x % Lp_) * L_ + x] += 1.0 - noise;
      }
    }
    return s;
  }

  void model(const Params& s, std::vector<double>& m) const {
    m.assign(cells_, 0.0);
    for (std::size_t x = 0; x < L_; ++x) {
      term_.assign(1, s.p[x]);
      for (std::size_t k = 0; k < K_; ++k) {
        next_.resize(term_.size() * Lp_);
        for (std::size_t a = 0; a < term_.size(); ++a) {
          for (std::size_t y = 0; y < Lp_; ++y) next_[a * Lp_ + y] = term_[a] * s.w[k][y * L_ + x];
        }
        term_.swap(next_);
      }
      for (std::size_t c = 0; c < cells_; ++c) m[c] += term_[c];
    }
  }

  double value(const Params& s) const {
    model(s, m_);
    return loss(m_, q_, kind_, config_.kl_smoothing);
  }

  // Gradient with respect to p (block == K_) or channel `block`.
  void gradient(const Params& s, std::size_t block, std::vector<double>& grad) const {
    model(s, m_);
    loss_gradient(m_, q_, kind_, config_.kl_smoothing, g_);
    index_.assign(K_, 0);
    if (block == K_) {
      grad.assign(L_, 0.0);
    } else {
      grad.assign(Lp_ * L_, 0.0);
    }
    for (std::size_t c = 0; c < cells_; ++c) {
      if (g_[c] != 0.0) {
        for (std::size_t x = 0; x < L_; ++x) {
          double prod = g_[c];
          for (std::size_t k = 0; k < K_; ++k) {
            if (k != block) prod *= s.w[k][index_[k] * L_ + x];
          }
          if (block == K_) {
            grad[x] += prod;
          } else {
            grad[index_[block] * L_ + x] += prod * s.p[x];
          }
        }
      }
      for (std::size_t a = K_; a-- > 0;) {
        if (++index_[a] < Lp_) break;
        index_[a] = 0;
      }
    }
  }

  // Projects a block onto its feasible set in place.
  void project(std::size_t block, std::vector<double>& z) const {
    if (block == K_) {
      col_.assign(z.begin(), z.end());
      project_simplex_into(col_, z, scratch_);
      return;
    }
    col_.resize(Lp_);
    out_.resize(Lp_);
    for (std::size_t x = 0; x < L_; ++x) {
      for (std::size_t y = 0; y < Lp_; ++y) col_[y] = z[y * L_ + x];
      project_simplex_into(col_, out_, scratch_);
      for (std::size_t y = 0; y < Lp_; ++y) z[y * L_ + x] = out_[y];
    }
  }

  struct Outcome {
    double objective;
    std::size_t iterations;
    bool converged;
  };

  // Least-squares block descent and polish(); KL and L1 fits then continue
  // from that point with block descent on their own objective.
  Outcome run(Params& s, std::vector<double>* trace) const {
    kind_ = Objective::l2sq;
    const Outcome coarse = descend(s, trace);
    const Outcome fine = polish(s, coarse.objective, trace);
    if (config_.objective == Objective::l2sq) {
      return {fine.objective, coarse.iterations + fine.iterations, fine.converged};
    }
    kind_ = config_.objective;
    if (trace) trace->push_back(value(s));
    const Outcome refined = descend(s, trace);
    return {refined.objective, coarse.iterations + fine.iterations + refined.iterations,
            refined.converged};
  }

  // Block-coordinate descent: p, then W_1..W_K, each by projected gradient
  // with a backtracking (sufficient decrease) line search. A trial point is
  // accepted only if it does not increase the objective.
  Outcome descend(Params& s, std::vector<double>* trace) const {
    std::vector<double> steps(K_ + 1, 1.0);
    std::vector<double> grad;
    std::vector<double> trial;
    double f = value(s);
    if (trace) trace->push_back(f);

    for (std::size_t iter = 1; iter <= config_.max_iters; ++iter) {
      const double f_start = f;
      double max_change = 0.0;
      for (std::size_t block = 0; block <= K_; ++block) {
        const std::size_t b = (block == 0) ? K_ : block - 1;  // p first
        std::vector<double>& z = (b == K_) ? s.p : s.w[b];
        for (int inner = 0; inner < kInnerSteps; ++inner) {
          gradient(s, b, grad);
          const std::vector<double> z0 = z;
          bool accepted = false;
          double eta = steps[b];
          for (int tries = 0; tries < kMaxBacktracks; ++tries) {
            trial.resize(z0.size());
            for (std::size_t i = 0; i < z0.size(); ++i) trial[i] = z0[i] - eta * grad[i];
            project(b, trial);
            double lin = 0.0;
            double sq = 0.0;
            for (std::size_t i = 0; i < z0.size(); ++i) {
              const double d = trial[i] - z0[i];
              lin += grad[i] * d;
              sq += d * d;
            }
            if (sq == 0.0) break;  // stationary for this block
            z = trial;
            const double f_new = value(s);
            if (f_new <= f + lin + sq / (2.0 * eta) && f_new <= f) {
              for (std::size_t i = 0; i < z0.size(); ++i) {
                max_change = std::max(max_change, std::abs(z[i] - z0[i]));
              }
              f = f_new;
              accepted = true;
              break;
            }
            z = z0;
            eta *= 0.5;
          }
          if (!accepted) {
            z = z0;
            steps[b] = std::max(eta, kMinStep);
            break;
          }
          steps[b] = std::min(eta * 2.0, kMaxStep);
        }
        if (trace) trace->push_back(f);
      }
      if ((max_change <= config_.step_tol && f_start - f <= config_.objective_tol) || f == 0.0) {
        return {f, iter, true};
      }
    }
    return {f, config_.max_iters, false};
  }

  // Levenberg-Marquardt on the least-squares objective over all blocks at
  // once. The last entry of p and of every channel column is eliminated
  // through its sum constraint; trial points are projected back onto the
  // simplices and accepted only if they lower the objective.
  Outcome polish(Params& s, double f, std::vector<double>* trace) const {
    const std::size_t free_p = L_ - 1;
    const std::size_t free_col = Lp_ - 1;
    const std::size_t dim = free_p + K_ * L_ * free_col;
    if (dim == 0) return {f, 0, true};

    Eigen::MatrixXd jac(cells_, dim);
    Eigen::VectorXd res(cells_);
    double lambda = 1e-3;
    for (std::size_t iter = 1; iter <= kPolishIters; ++iter) {
      if (f == 0.0) return {f, iter, true};
      model(s, m_);
      for (std::size_t c = 0; c < cells_; ++c) res[c] = m_[c] - q_[c];
      jacobian(s, jac);
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtr = jac.transpose() * res;

      bool accepted = false;
      double change = 0.0;
      double f_new = f;
      for (int tries = 0; tries < kMaxBacktracks; ++tries) {
        Eigen::MatrixXd a = jtj;
        a.diagonal().array() += lambda * (1.0 + jtj.diagonal().array());
        const Eigen::VectorXd delta = a.ldlt().solve(-jtr);
        if (!delta.allFinite()) {
          lambda *= 10.0;
          continue;
        }
        Params trial = s;
        apply_step(trial, delta);
        f_new = value(trial);
        if (f_new < f) {
          change = max_difference(s, trial);
          s = std::move(trial);
          accepted = true;
          lambda = std::max(lambda * 0.3, 1e-15);
          break;
        }
        lambda *= 10.0;
        if (lambda > 1e12) break;
      }
      if (trace) trace->push_back(accepted ? f_new : f);
      if (!accepted) return {f, iter, true};
      const double decrease = f - f_new;
      f = f_new;
      if (change <= config_.step_tol && decrease <= config_.objective_tol) {
        return {f, iter, true};
      }
    }
    return {f, kPolishIters, false};
  }

 private:
  // d m / d theta for the reduced parameterization used by polish().
  void jacobian(const Params& s, Eigen::MatrixXd& jac) const {
    jac.setZero();
    const std::size_t free_p = L_ - 1;
    const std::size_t free_col = Lp_ - 1;
    index_.assign(K_, 0);
    for (std::size_t c = 0; c < cells_; ++c) {
      for (std::size_t x = 0; x < L_; ++x) {
        double all = 1.0;
        for (std::size_t k = 0; k < K_; ++k) all *= s.w[k][index_[k] * L_ + x];
        // d/dp[x] with p[L-1] = 1 - sum of the others
        if (x < free_p) jac(c, x) += all;
        else
          for (std::size_t j = 0; j < free_p; ++j) jac(c, j) -= all;
        for (std::size_t k = 0; k < K_; ++k) {
          double others = s.p[x];
          for (std::size_t j = 0; j < K_; ++j) {
            if (j != k) others *= s.w[j][index_[j] * L_ + x];
          }
          const std::size_t base = free_p + (k * L_ + x) * free_col;
          const std::size_t y = index_[k];
          if (y < free_col) jac(c, base + y) += others;
          else
            for (std::size_t j = 0; j < free_col; ++j) jac(c, base + j) -= others;
        }
      }
      for (std::size_t a = K_; a-- > 0;) {
        if (++index_[a] < Lp_) break;
        index_[a] = 0;
      }
    }
  }

  void apply_step(Params& s, const Eigen::VectorXd& delta) const {
    const std::size_t free_p = L_ - 1;
    const std::size_t free_col = Lp_ - 1;
    double last = 1.0;
    for (std::size_t x = 0; x < free_p; ++x) {
      s.p[x] += delta[x];
      last -= s.p[x];
    }
    s.p[L_ - 1] = last;
    project(K_, s.p);
    for (std::size_t k = 0; k < K_; ++k) {
      for (std::size_t x = 0; x < L_; ++x) {
        const std::size_t base = free_p + (k * L_ + x) * free_col;
        double rest = 1.0;
        for (std::size_t y = 0; y < free_col; ++y) {
          s.w[k][y * L_ + x] += delta[base + y];
          rest -= s.w[k][y * L_ + x];
        }
        s.w[k][free_col * L_ + x] = rest;
      }
      project(k, s.w[k]);
    }
  }

  static double max_difference(const Params& a, const Params& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.p.size(); ++i) d = std::max(d, std::abs(a.p[i] - b.p[i]));
    for (std::size_t k = 0; k < a.w.size(); ++k) {
      for (std::size_t i = 0; i < a.w[k].size(); ++i) {
        d = std::max(d, std::abs(a.w[k][i] - b.w[k][i]));
      }
    }
    return d;
  }

  static constexpr std::size_t kPolishIters = 200;
  static constexpr int kInnerSteps = 3;
  static constexpr int kMaxBacktracks = 60;
  static constexpr double kMinStep = 1e-12;
  static constexpr double kMaxStep = 1e6;

  std::span<const double> q_;
  const InversionConfig& config_;
  std::size_t K_;
  std::size_t Lp_;
  std::size_t L_;
  std::size_t cells_ = 0;

  // scratch buffers; a Fitter is used by one thread at a time
  mutable std::vector<double> m_, g_, term_, next_, col_, out_, scratch_;
  mutable std::vector<std::size_t> index_;
  mutable Objective kind_ = Objective::l2sq;
};

DCSystem to_system(const Params& s) {
  std::vector<Channel> channels;
  for (const auto& w : s.w) channels.emplace_back(s.Lp, s.L, w);
  return DCSystem(Distribution(s.p), std::move(channels));
}

void validate_qhat(const JointTensor& qhat) {
  const std::size_t Lp = qhat.shape().front();
  for (std::size_t s : qhat.shape()) {
    if (s != Lp) throw ValidationError("invert_theta: all output alphabets must have equal size");
  }
  if (!qhat.is_distribution()) throw ValidationError("invert_theta: qhat does not sum to 1");
}

}  // namespace

std::vector<double> descent_trace(const JointTensor& qhat, const InversionConfig& config,
                                  std::size_t restart) {
  config.validate();
  validate_qhat(qhat);
  Fitter fitter(qhat, config);
  Params s = fitter.initial(restart);
  std::vector<double> trace;
  fitter.run(s, &trace);
  return trace;
}

InversionResult invert_theta(const JointTensor& qhat, const InversionConfig& config) {
  config.validate();
  validate_qhat(qhat);

  std::vector<Params> fits(config.restarts);
  std::vector<RestartLog> logs(config.restarts);
  auto work = [&](std::size_t r) {
    Fitter fitter(qhat, config);
    fits[r] = fitter.initial(r);
    const auto out = fitter.run(fits[r], nullptr);
    logs[r] = {out.objective, out.iterations, out.converged};
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.restarts)));
  if (threads == 1) {
    for (std::size_t r = 0; r < config.restarts; ++r) work(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < config.restarts;) work(r);
      });
    }
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < config.restarts; ++r) {
    if (logs[r].objective < logs[best].objective) best = r;
  }

  InversionResult result{.system = canonicalize(to_system(fits[best]))};
  result.objective_value = logs[best].objective;
  result.converged = logs[best].converged;
  result.best_restart = best;
  result.restarts = std::move(logs);
  if (qhat.rank() < 3) {
    result.warnings.push_back("fewer than three outputs: the fitted system is not identifiable");
  }
  const auto& p = result.system.p();
  result.near_boundary =
      std::any_of(p.probs().begin(), p.probs().end(), [](double v) { return v < 1e-6; });
  if (result.near_boundary) {
    result.warnings.push_back("p_hat has an entry below 1e-6: the hidden alphabet may be too large");
  }
  return result;
}

// ------------------------------------------------------------ canonicalization

DCSystem canonicalize(const DCSystem& system) {
  const std::size_t L = system.hidden_size();
  std::vector<std::size_t> order(L);
  for (std::size_t i = 0; i < L; ++i) order[i] = i;
  const auto& p = system.p();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p[a] != p[b]) return p[a] > p[b];
    for (const auto& w : system.channels()) {
      for (std::size_t i = 0; i < w.rows(); ++i) {
        if (w(i, a) != w(i, b)) return w(i, a) > w(i, b);
      }
    }
    return false;
  });
  // Old symbol order[i] becomes symbol i.
  std::vector<std::size_t> tau(L);
  for (std::size_t i = 0; i < L; ++i) tau[order[i]] = i;
  return permute_system(Permutation(std::move(tau)), system);
}

Permutation align_permutation(const Distribution& p_true, const Distribution& p_est) {
  const std::size_t L = p_true.size();
  if (p_est.size() != L) throw ValidationError("align_permutation: length mismatch");

  auto cost = [&](const std::vector<std::size_t>& m) {
    double c = 0.0;
    for (std::size_t i = 0; i < L; ++i) c += std::abs(p_est[i] - p_true[m[i]]);
    return c;
  };

  if (L > 8) {
    // Matching sorted orders is optimal for the 1-D L1 assignment cost.
    std::vector<std::size_t> a(L), b(L), m(L);
    for (std::size_t i = 0; i < L; ++i) a[i] = b[i] = i;
    std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) { return p_est[x] > p_est[y]; });
    std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) { return p_true[x] > p_true[y]; });
    for (std::size_t i = 0; i < L; ++i) m[a[i]] = b[i];
    return Permutation(std::move(m));
  }

  std::vector<std::size_t> m(L);
  for (std::size_t i = 0; i < L; ++i) m[i] = i;
  std::vector<std::size_t> best = m;
  double best_cost = cost(m);
  while (std::next_permutation(m.begin(), m.end())) {
    const double c = cost(m);
    if (c < best_cost) {
      best_cost = c;
      best = m;
    }
  }
  return Permutation(std::move(best));
}

}  // namespace dcs
