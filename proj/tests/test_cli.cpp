#include "dcs/io.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

using namespace dcs;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("dcs_cli_test_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(dir); }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(DCS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("gen writes a valid, reproducible system") {
  Scratch tmp;
  REQUIRE(run("gen --L 2 --Lprime 2 --K 3 --seed 1 --out " + tmp / "a.json") == 0);
  REQUIRE(run("gen --L 2 --Lprime 2 --K 3 --seed 1 --out " + tmp / "b.json") == 0);
  CHECK(read_file(tmp / "a.json") == read_file(tmp / "b.json"));
  const auto s = load_system(tmp / "a.json");
  CHECK(s.p().strictly_descending());
  CHECK(s.p().strictly_positive());

  REQUIRE(run("gen --L 3 --Lprime 2 --K 3 --seed 7 --out " + tmp / "c.json") == 0);
  const auto c = load_system(tmp / "c.json");
  CHECK(c.channel(0).rows() == 2);
  CHECK(c.channel(0).cols() == 3);
  for (const auto& w : c.channels()) {
    CHECK(w.column(0) != w.column(1));
    CHECK(w.column(0) != w.column(2));
    CHECK(w.column(1) != w.column(2));
  }
}

TEST_CASE("simulate, estimate and invert") {
  Scratch tmp;
  REQUIRE(run("gen --L 2 --Lprime 2 --K 3 --seed 3 --out " + tmp / "s.json") == 0);
  REQUIRE(run("simulate --system " + tmp / "s.json" + " --n 1000 --seed 5 --out " + tmp / "y.csv") == 0);
  const auto batch = samples_from_string(read_file(tmp / "y.csv"));
  CHECK(batch.records() == 1000);
  CHECK(batch.agents() == 3);

  REQUIRE(run("estimate --samples " + tmp / "y.csv" + " --out " + tmp / "qhat.json") == 0);
  CHECK(tensor_from_string(read_file(tmp / "qhat.json")).is_distribution());

  REQUIRE(run("check theta --system " + tmp / "s.json" + " --out " + tmp / "q.json") == 0);
  REQUIRE(run("invert --q " + tmp / "q.json" + " --L 2 --restarts 32 --out " + tmp / "r.json") == 0);
  const auto doc = result_from_string(read_file(tmp / "r.json"));
  CHECK(doc.result.objective_value < 1e-9);
  CHECK(doc.config.restarts == 32);
  CHECK(doc.version == kVersion);

  REQUIRE(run("invert --samples " + tmp / "y.csv" + " --L 2 --restarts 4 --seed 2 --out " + tmp / "r1.json") == 0);
  REQUIRE(run("invert --samples " + tmp / "y.csv" + " --L 2 --restarts 4 --seed 2 --out " + tmp / "r2.json") == 0);
  CHECK(read_file(tmp / "r1.json") == read_file(tmp / "r2.json"));
}

TEST_CASE("check sub-verbs") {
  Scratch tmp;
  REQUIRE(run("gen --L 3 --Lprime 3 --K 3 --seed 2 --out " + tmp / "s.json") == 0);
  for (const char* verb : {"invertible", "activation", "kernels", "mi", "fork"}) {
    CAPTURE(verb);
    CHECK(run(std::string("check ") + verb + " --system " + tmp / "s.json") == 0);
  }
  CHECK(run("check params --L 2 --K 3") == 0);
  CHECK(run("check activation --system " + tmp / "s.json" + " --Kmax 3") == 0);
}

TEST_CASE("verify exit codes") {
  CHECK(run("verify --suite fork --seed 1") == 0);
  CHECK(run("verify --suite gap --seed 1 --inject-fault") == 3);
  CHECK(run("verify --suite nope") == 2);
}

TEST_CASE("usage, validation and I/O errors") {
  Scratch tmp;
  CHECK(run("") == 64);
  CHECK(run("frobnicate") == 64);
  CHECK(run("gen --L 2") == 64);
  CHECK(run("invert --L 2") == 64);
  CHECK(run("invert --L 2 --objective l3 --q x") == 64);
  CHECK(run("--help") == 0);

  write_file_atomic(tmp / "bad.json", R"({"p": [0.5, 0.6], "channels": [[[1, 0], [0, 1]]]})");
  CHECK(run("check theta --system " + tmp / "bad.json") == 2);
  CHECK(run("simulate --system " + tmp / "missing.json" + " --n 10") == 1);
  REQUIRE(run("gen --L 2 --Lprime 2 --K 3 --seed 1 --out " + tmp / "s.json") == 0);
  CHECK(run("simulate --system " + tmp / "s.json" + " --n 0") == 2);
  CHECK(run("gen --L 2 --Lprime 2 --K 3 --out " + tmp / "nodir/s.json") == 1);
}
