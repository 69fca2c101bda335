// dcs: simulate, estimate and invert dependent component systems.
//
// Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 suite failure,
// 64 usage error.

#include "dcs/analysis.hpp"
#include "dcs/inversion.hpp"
#include "dcs/io.hpp"
#include "dcs/sampling.hpp"
#include "dcs/suites.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitSuite = 3;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    dcs::write_file_atomic(out_path, text);
  }
}

dcs::JointTensor load_q(const std::string& q_path, const std::string& samples_path,
                        std::optional<std::size_t> lprime) {
  if (q_path.empty() == samples_path.empty()) {
    throw UsageError("exactly one of --q or --samples is required");
  }
  if (!q_path.empty()) return dcs::tensor_from_string(dcs::read_file(q_path));
  return dcs::ml_estimate(
      dcs::type_counts(dcs::samples_from_string(dcs::read_file(samples_path), lprime)));
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dependent component systems: simulate, estimate, invert, check, verify"};
  app.require_subcommand(1);

  // gen
  std::size_t gen_L = 0, gen_Lp = 0, gen_K = 0;
  dcs::Seed seed = 0;
  std::string out;
  auto* gen = app.add_subcommand("gen", "Write a random system file");
  gen->add_option("--L", gen_L, "Hidden alphabet size")->required();
  gen->add_option("--Lprime", gen_Lp, "Output alphabet size")->required();
  gen->add_option("--K", gen_K, "Number of channels")->required();
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out, "Output path (default: stdout)");

  // simulate
  std::string system_path;
  std::size_t n = 0;
  auto* simulate = app.add_subcommand("simulate", "Sample observations from a system");
  simulate->add_option("--system", system_path, "System file")->required();
  simulate->add_option("--n", n, "Number of observations")->required();
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--out", out, "Sample CSV path (default: stdout)");

  // estimate
  std::string samples_path;
  std::optional<std::size_t> lprime;
  auto* estimate = app.add_subcommand("estimate", "Maximum-likelihood estimate of q from samples");
  estimate->add_option("--samples", samples_path, "Sample CSV")->required();
  estimate->add_option("--Lprime", lprime, "Output alphabet size (default: largest symbol)");
  estimate->add_option("--out", out, "Tensor file path (default: stdout)");

  // invert
  std::string q_path;
  dcs::InversionConfig config;
  std::string objective_name = "l2sq";
  std::optional<double> tol;
  unsigned threads = 0;
  auto* invert = app.add_subcommand("invert", "Recover (p, W_1..W_K) from q or samples");
  invert->add_option("--q", q_path, "Tensor file with the output distribution");
  invert->add_option("--samples", samples_path, "Sample CSV (estimated first)");
  invert->add_option("--Lprime", lprime, "Output alphabet size for --samples");
  invert->add_option("--L", config.hidden_size, "Hidden alphabet size to fit")->required();
  invert->add_option("--restarts", config.restarts, "Random restarts")->capture_default_str();
  invert->add_option("--max-iters", config.max_iters, "Sweeps per restart")->capture_default_str();
  invert->add_option("--objective", objective_name, "kl, l1 or l2sq")
      ->check(CLI::IsMember({"kl", "l1", "l2sq"}))
      ->capture_default_str();
  invert->add_option("--tol", tol, "Step tolerance");
  invert->add_option("--seed", seed, "Random seed");
  invert->add_option("--threads", threads, "Concurrent restarts (default: DCS_THREADS or all cores)");
  invert->add_option("--out", out, "Result file path (default: stdout)");

  // check
  double check_tol = 1e-9;
  std::size_t kmax = 5;
  std::size_t check_L = 0, check_K = 0;
  auto* check = app.add_subcommand("check", "Run one analysis on a system or distribution");
  check->require_subcommand(1);
  auto add_system = [&](CLI::App* sub) {
    sub->add_option("--system", system_path, "System file")->required();
  };
  auto* check_theta = check->add_subcommand("theta", "Output distribution of a system");
  add_system(check_theta);
  check_theta->add_option("--out", out, "Tensor file path (default: stdout)");
  auto* check_invertible = check->add_subcommand("invertible", "Invertibility of each channel");
  add_system(check_invertible);
  auto* check_activation = check->add_subcommand("activation", "Minimal activation order per channel");
  add_system(check_activation);
  check_activation->add_option("--Kmax", kmax, "Largest power to try")->capture_default_str();
  auto* check_kernels = check->add_subcommand("kernels", "Whether all channels share a kernel");
  add_system(check_kernels);
  auto* check_mi = check->add_subcommand("mi", "Pairwise mutual information of the outputs");
  check_mi->add_option("--system", system_path, "System file");
  check_mi->add_option("--q", q_path, "Tensor file");
  auto* check_fork = check->add_subcommand("fork", "Conditional independence given the hidden symbol");
  add_system(check_fork);
  auto* check_params = check->add_subcommand("params", "Parameter-counting inequality");
  check_params->add_option("--L", check_L, "Hidden alphabet size")->required();
  check_params->add_option("--K", check_K, "Number of channels")->required();
  for (auto* sub : {check_invertible, check_activation, check_kernels, check_fork}) {
    sub->add_option("--tol", check_tol, "Numerical tolerance")->capture_default_str();
  }

  // verify
  std::string suite = "all";
  bool inject_fault = false;
  auto* verify = app.add_subcommand("verify", "Run named property suites");
  verify->add_option("--suite", suite, "Suite name or 'all'")->capture_default_str();
  verify->add_option("--seed", seed, "Random seed");
  verify->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      emit(out, dcs::system_to_string(dcs::random_system(gen_L, gen_Lp, gen_K, seed)));
    } else if (*simulate) {
      const auto system = dcs::load_system(system_path);
      emit(out, dcs::samples_to_string(dcs::sample_dcs(system, n, seed)));
    } else if (*estimate) {
      const auto batch = dcs::samples_from_string(dcs::read_file(samples_path), lprime);
      emit(out, dcs::tensor_to_string(dcs::ml_estimate(dcs::type_counts(batch))));
    } else if (*invert) {
      const auto q = load_q(q_path, samples_path, lprime);
      config.objective = *dcs::parse_objective(objective_name);
      config.seed = seed;
      if (tol) config.step_tol = *tol;
      config.threads = threads ? threads : dcs::default_thread_count();
      auto result = dcs::invert_theta(q, config);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      emit(out, dcs::result_to_string({std::move(result), config}));
    } else if (*check) {
      nlohmann::json report;
      if (*check_theta) {
        emit(out, dcs::tensor_to_string(dcs::theta(dcs::load_system(system_path))));
        return 0;
      } else if (*check_invertible) {
        const auto s = dcs::load_system(system_path);
        for (const auto& w : s.channels()) {
          report["invertible"].push_back(w.rows() == w.cols() && dcs::channel_invertible(w, check_tol));
        }
      } else if (*check_activation) {
        const auto s = dcs::load_system(system_path);
        for (const auto& w : s.channels()) {
          const auto order = dcs::min_activation_order(w, kmax, check_tol);
          report["min_activation_order"].push_back(order ? nlohmann::json(*order) : nlohmann::json());
        }
      } else if (*check_kernels) {
        report["kernels_equal"] = dcs::kernels_equal(dcs::load_system(system_path).channels(), check_tol);
      } else if (*check_mi) {
        if (system_path.empty() == q_path.empty()) {
          throw UsageError("exactly one of --system or --q is required");
        }
        const auto q = q_path.empty() ? dcs::theta(dcs::load_system(system_path))
                                      : dcs::tensor_from_string(dcs::read_file(q_path));
        report["mutual_information"] = matrix_json(dcs::pairwise_mutual_information(q));
      } else if (*check_fork) {
        report["conjunctive_fork"] =
            dcs::conjunctive_fork_check(dcs::load_system(system_path), check_tol);
      } else if (*check_params) {
        report["parameter_count_feasible"] = dcs::parameter_count_feasible(check_L, check_K);
      }
      std::cout << report.dump(2) << "\n";
    } else if (*verify) {
      std::vector<std::string> names;
      if (suite == "all") {
        names = dcs::suite_names();
      } else {
        names.push_back(suite);
      }
      bool all_passed = true;
      for (const auto& name : names) {
        const auto report = dcs::run_suite(name, {seed, inject_fault});
        for (const auto& line : report.lines) std::cout << "  " << line << "\n";
        std::cout << (report.passed ? "PASS " : "FAIL ") << report.name << "\n";
        all_passed = all_passed && report.passed;
      }
      return all_passed ? 0 : kExitSuite;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dcs::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  }
  return 0;
}
