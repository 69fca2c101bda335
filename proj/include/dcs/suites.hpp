#pragma once

// Named property suites run by `dcs verify --suite NAME`.
//
//   roundtrip      exact-q inversion recovers seeded systems (L = 2, 3; K = 3)
//   uniqueness     theta is invariant under exactly the L! relabelings
//   k2ambiguity    two distinct K = 2 systems share their output law
//   activation     W^{(x)(L-1)} is injective on diagonal inputs; rank grows with K
//   conspiracy     shared-kernel channel lists are recognized, random ones are not
//   mi             positive pairwise MI with colliding hidden distributions
//   fork           outputs are conditionally independent given the hidden symbol
//   gap            noisy-test divergence shrinks toward zero near a singular channel
//   concentration  ML estimates pass the 1/sqrt(n) typicality test
//
// `inject_fault` corrupts one step of the suite so that it must fail; it
// exists to check that each suite can actually detect a violation.

#include "dcs/rng.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dcs {

struct SuiteOptions {
  Seed seed = 1;
  bool inject_fault = false;
};

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::vector<std::string> lines;
};

const std::vector<std::string>& suite_names();

/// Throws ValidationError for an unknown name.
SuiteReport run_suite(std::string_view name, const SuiteOptions& options);

}  // namespace dcs
