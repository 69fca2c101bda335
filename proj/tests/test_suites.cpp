#include "dcs/suites.hpp"
#include "dcs/tensor_core.hpp"

#include <doctest.h>

using namespace dcs;

TEST_CASE("every suite passes on a clean run and fails with an injected fault") {
  REQUIRE(suite_names().size() == 9);
  for (const auto& name : suite_names()) {
    CAPTURE(name);
    const auto clean = run_suite(name, {1, false});
    CHECK(clean.name == name);
    CHECK(clean.passed);
    CHECK_FALSE(clean.lines.empty());
    CHECK_FALSE(run_suite(name, {1, true}).passed);
  }
}

TEST_CASE("suites are reproducible for a fixed seed") {
  for (const char* name : {"uniqueness", "fork", "gap"}) {
    CHECK(run_suite(name, {3, false}).lines == run_suite(name, {3, false}).lines);
  }
}

TEST_CASE("unknown suite") { CHECK_THROWS_AS(run_suite("nope", {}), ValidationError); }
