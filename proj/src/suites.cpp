#include "dcs/suites.hpp"

#include "dcs/analysis.hpp"
#include "dcs/inversion.hpp"
#include "dcs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace dcs {

namespace {

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << args);
  return os.str();
}

double max_entry_error(const DCSystem& a, const DCSystem& b) {
  double e = 0.0;
  for (std::size_t k = 0; k < a.agents(); ++k) {
    const auto x = a.channel(k).entries();
    const auto y = b.channel(k).entries();
    for (std::size_t i = 0; i < x.size(); ++i) e = std::max(e, std::abs(x[i] - y[i]));
  }
  return e;
}

// Moves `weight` of mass onto cell 0 of q.
JointTensor corrupt(const JointTensor& q, double weight) {
  auto v = q.vector();
  for (auto& x : v) x *= 1.0 - weight;
  v[0] += weight;
  return JointTensor(q.shape(), std::move(v));
}

SuiteReport roundtrip(const SuiteOptions& o) {
  SuiteReport r{"roundtrip", false, {}};
  std::size_t good = 0;
  const std::size_t total = 20;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t L = 2 + i % 2;
    const DCSystem truth = random_system(L, L, 3, o.seed * 1000 + i, 0.1);
    JointTensor q = theta(truth);
    if (o.inject_fault) q = corrupt(q, 0.2);
    InversionConfig config;
    config.hidden_size = L;
    config.restarts = 32;
    config.seed = o.seed + i;
    const auto fit = invert_theta(q, config);
    const double perr = lp_distance(fit.p_hat(), truth.p(), 1);
    const double cerr = max_entry_error(fit.system, truth);
    const bool ok = perr <= 1e-3 && cerr <= 5e-3;
    good += ok;
    r.lines.push_back(cat("system ", i, " L=", L, " |p_hat-p|_1=", perr, " max|W_hat-W|=", cerr,
                          ok ? " ok" : " FAIL"));
  }
  r.passed = good >= 18;
  r.lines.push_back(cat(good, "/", total, " recovered (need 18)"));
  return r;
}

SuiteReport uniqueness(const SuiteOptions& o) {
  SuiteReport r{"uniqueness", false, {}};
  const DCSystem system = random_system(3, 3, 3, o.seed, 0.1);
  const JointTensor q = theta(system);
  bool invariant = true;
  for (const auto& tau : all_permutations(3)) {
    DCSystem moved = permute_system(tau, system);
    if (o.inject_fault) moved = DCSystem(tau.apply(system.p()), system.channels());
    const double d = lp_distance(theta(moved), q, 1);
    // the identity leaves everything fixed, fault or not
    invariant = invariant && d <= 1e-12;
    r.lines.push_back(cat("permutation ", tau(0), tau(1), tau(2), " theta change ", d));
  }
  std::size_t detected = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    Rng rng = Rng::stream(o.seed, t);
    const DCSystem s = random_system(3, 3, 3, rng.next_u64(), 0.1);
    const std::size_t k = rng.below(3);
    const std::size_t x = rng.below(3);
    const std::size_t y = rng.below(3);
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < 3; ++j) cols.push_back(s.channel(k).column(j));
    cols[x][y] += 1e-3;
    for (auto& v : cols[x]) v /= 1.001;
    auto channels = s.channels();
    channels[k] = Channel::from_columns(cols);
    detected += lp_distance(theta(DCSystem(s.p(), channels)), theta(s), 1) >= 1e-5;
  }
  r.lines.push_back(cat(detected, "/100 single-column perturbations change theta by >= 1e-5"));
  r.passed = invariant && detected == 100;
  return r;
}

SuiteReport k2ambiguity(const SuiteOptions& o) {
  SuiteReport r{"k2ambiguity", false, {}};
  std::size_t good = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    auto w = k2_ambiguity_witness(2 + i % 3, o.seed * 100 + i);
    if (o.inject_fault) {
      w.second = DCSystem(w.second.p(), {Channel::identity(w.second.hidden_size()),
                                         w.second.channel(1)});
    }
    const double dq = lp_distance(theta(w.first), theta(w.second), 1);
    const double dp = lp_distance(w.first.p(), w.second.p(), 1);
    good += dq < 1e-12 && dp > 1e-3;
  }
  r.passed = good == 50;
  r.lines.push_back(cat(good, "/50 witnesses with equal theta and distinct hidden laws"));
  return r;
}

SuiteReport activation(const SuiteOptions& o) {
  SuiteReport r{"activation", false, {}};
  const Channel w = Channel::from_columns({{1, 0}, {0, 1}, {0.5, 0.5}});
  const bool k1 = activation_invertible(w, 1);
  const bool k2 = activation_invertible(w, o.inject_fault ? 1 : 2);
  r.lines.push_back(cat("three-column example: K=1 ", k1, ", K=2 ", k2));
  bool ok = !k1 && k2;

  std::size_t good = 0;
  bool monotone = true;
  for (std::size_t i = 0; i < 100; ++i) {
    Rng rng = Rng::stream(o.seed, i);
    const std::size_t L = 2 + rng.below(4);
    const std::size_t Lp = 2 + rng.below(3);
    Channel c = random_channel(Lp, L, rng);
    double gap = 0.0;
    do {
      c = random_channel(Lp, L, rng);
      gap = kInfinity;
      for (std::size_t a = 0; a < L; ++a) {
        for (std::size_t b = a + 1; b < L; ++b) {
          double d = 0.0;
          for (std::size_t y = 0; y < Lp; ++y) d = std::max(d, std::abs(c(y, a) - c(y, b)));
          gap = std::min(gap, d);
        }
      }
    } while (gap < 1e-3);
    good += activation_invertible(c, L - 1);
    std::size_t prev = 0;
    for (std::size_t k = 1; k <= L; ++k) {
      const std::size_t rank = numerical_rank(restricted_matrix(c, k));
      monotone = monotone && rank >= prev;
      prev = rank;
    }
  }
  r.lines.push_back(cat(good, "/100 random channels invertible at K = L-1; rank monotone: ", monotone));
  r.passed = ok && good == 100 && monotone;
  return r;
}

SuiteReport conspiracy(const SuiteOptions& o) {
  SuiteReport r{"conspiracy", false, {}};
  std::size_t shared = 0;
  std::size_t independent = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    Rng rng = Rng::stream(o.seed, i);
    const Eigen::MatrixXd p = to_matrix(random_channel(2, 3, rng));
    std::vector<Channel> conspiring;
    for (int k = 0; k < 3; ++k) {
      const Eigen::MatrixXd mix =
          o.inject_fault ? to_matrix(random_channel(2, 3, rng))
                         : to_matrix(random_noisy_identity(2, 2, rng)) * p;
      std::vector<double> e(6);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 3; ++b) e[a * 3 + b] = mix(a, b);
      }
      conspiring.emplace_back(2, 3, std::move(e));
    }
    shared += kernels_equal(conspiring, 1e-9);
    std::vector<Channel> random;
    for (int k = 0; k < 3; ++k) random.push_back(random_channel(2, 3, rng));
    independent += !kernels_equal(random, 1e-9);
  }
  r.lines.push_back(cat(shared, "/50 shared-kernel lists detected, ", independent,
                        "/50 random lists rejected"));
  r.passed = shared == 50 && independent == 50;
  return r;
}

SuiteReport mi(const SuiteOptions& o) {
  SuiteReport r{"mi", false, {}};
  const auto ce = mi_counterexample(Distribution({0.5, 0.5}), 3);
  DCSystem other = ce.second;
  if (o.inject_fault) other = DCSystem(Distribution({0.2, 0.1, 0.4, 0.3}), other.channels());
  const JointTensor q = theta(ce.first);
  const auto info = pairwise_mutual_information(q);
  double min_mi = kInfinity;
  for (Eigen::Index i = 0; i < info.rows(); ++i) {
    for (Eigen::Index j = 0; j < info.cols(); ++j) {
      if (i != j) min_mi = std::min(min_mi, info(i, j));
    }
  }
  const double collision = lp_distance(q, theta(other), 1);
  r.lines.push_back(cat("min pairwise MI ", min_mi, " bits; theta distance ", collision));
  r.passed = min_mi > 0.01 && collision <= 1e-15 &&
             lp_distance(ce.first.p(), other.p(), 1) > 0.0;
  return r;
}

SuiteReport fork(const SuiteOptions& o) {
  SuiteReport r{"fork", false, {}};
  std::size_t good = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    Rng rng = Rng::stream(o.seed, i);
    const std::size_t L = 2 + rng.below(3);
    const std::size_t Lp = 2 + rng.below(3);
    const std::size_t K = 2 + rng.below(2);
    std::vector<Channel> channels;
    for (std::size_t k = 0; k < K; ++k) channels.push_back(random_channel(Lp, L, rng));
    const DCSystem s(Distribution(rng.dirichlet(L)), channels);
    if (o.inject_fault) {
      // Outputs copy each other beyond what the cause explains.
      JointTensor joint = hidden_joint(s);
      auto v = joint.vector();
      const std::size_t rest = v.size() / L;
      for (std::size_t c = 0; c < L; ++c) {
        for (std::size_t j = 0; j < rest; ++j) v[c * rest + j] *= 0.5;
        v[c * rest] += 0.5 * s.p()[c];
      }
      good += conditionally_independent(JointTensor(joint.shape(), std::move(v)), 1e-10);
    } else {
      good += conjunctive_fork_check(s, 1e-10);
    }
  }
  r.lines.push_back(cat(good, "/100 systems satisfy s(A|B,C) = s(A|C)"));
  r.passed = good == 100;
  return r;
}

SuiteReport gap(const SuiteOptions& o) {
  SuiteReport r{"gap", false, {}};
  std::vector<double> ts{0.5, 0.1, 0.01, 0.001};
  if (o.inject_fault) std::reverse(ts.begin(), ts.end());
  const auto d = vanishing_infimum_demo(Distribution({0.6, 0.4}), Distribution({0.4, 0.6}), 3, ts);
  bool ok = d.front() > 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    r.lines.push_back(cat("t=", ts[i], " D=", d[i]));
    if (i > 0) ok = ok && d[i] < d[i - 1] && d[i] > 0.0;
  }
  r.passed = ok && d.back() < 0.1 * d.front();
  return r;
}

SuiteReport concentration(const SuiteOptions& o) {
  SuiteReport r{"concentration", false, {}};
  const DCSystem s = random_system(2, 2, 3, o.seed, 0.1);
  const JointTensor q = theta(s);
  const JointTensor reference = o.inject_fault ? corrupt(q, 0.2) : q;
  std::size_t failures = 0;
  for (std::size_t t = 0; t < 200; ++t) {
    const auto qhat = ml_estimate(type_counts(sample_dcs(s, 10000, o.seed * 7919 + t, 1)));
    failures += !typicality_test(qhat, reference, 10000);
  }
  r.lines.push_back(cat(failures, "/200 trials rejected at n=10^4"));
  bool monotone = true;
  double prev = kInfinity;
  for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
    std::vector<double> kls;
    for (std::size_t t = 0; t < 50; ++t) {
      kls.push_back(kl_divergence(ml_estimate(type_counts(sample_dcs(s, n, o.seed + 31 * t, 1))), q));
    }
    std::nth_element(kls.begin(), kls.begin() + 25, kls.end());
    const double med = kls[25];
    r.lines.push_back(cat("n=", n, " median KL ", med));
    monotone = monotone && med <= prev;
    prev = med;
  }
  r.passed = failures <= 10 && monotone;
  return r;
}

const std::map<std::string, std::function<SuiteReport(const SuiteOptions&)>, std::less<>>&
registry() {
  static const std::map<std::string, std::function<SuiteReport(const SuiteOptions&)>, std::less<>>
      suites{{"roundtrip", roundtrip}, {"uniqueness", uniqueness}, {"k2ambiguity", k2ambiguity},
             {"activation", activation}, {"conspiracy", conspiracy}, {"mi", mi},
             {"fork", fork}, {"gap", gap}, {"concentration", concentration}};
  return suites;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"roundtrip", "uniqueness", "k2ambiguity",
                                              "activation", "conspiracy", "mi",
                                              "fork", "gap", "concentration"};
  return names;
}

SuiteReport run_suite(std::string_view name, const SuiteOptions& options) {
  const auto& suites = registry();
  const auto it = suites.find(name);
  if (it == suites.end()) throw ValidationError("unknown suite '" + std::string(name) + "'");
  return it->second(options);
}

}  // namespace dcs
