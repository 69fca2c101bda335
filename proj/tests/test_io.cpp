#include "dcs/io.hpp"

#include <doctest.h>

#include <unistd.h>

#include <filesystem>

using namespace dcs;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / ("dcs_io_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("system file round trip is value-identical") {
  for (Seed seed = 0; seed < 10; ++seed) {
    const auto s = random_system(2 + seed % 3, 2 + seed % 2, 3, seed);
    const auto text = system_to_string(s);
    const auto back = system_from_string(text);
    CHECK(back == s);
    CHECK(system_to_string(back) == text);
  }
}

TEST_CASE("system file layout is [output][input]") {
  const DCSystem s(Distribution({0.75, 0.25}), {Channel(2, 2, {0.9, 0.2, 0.1, 0.8})});
  const auto j = system_to_string(s);
  CHECK(j.find("\"Lprime\": 2") != std::string::npos);
  const auto back = system_from_string(
      R"({"L": 2, "Lprime": 2, "K": 1, "p": [0.75, 0.25], "channels": [[[0.9, 0.2], [0.1, 0.8]]]})");
  CHECK(back == s);
}

TEST_CASE("system file validation") {
  CHECK_THROWS_AS(system_from_string("{not json"), ValidationError);
  CHECK_THROWS_AS(system_from_string(R"({"p": [0.5, 0.6], "channels": [[[1, 0], [0, 1]]]})"), ValidationError);
  CHECK_THROWS_AS(system_from_string(R"({"p": [0.5, 0.5], "channels": [[[0.9, 0.2], [0.2, 0.8]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(system_from_string(R"({"L": 3, "p": [0.5, 0.5], "channels": [[[1, 0], [0, 1]]]})"),
                  ValidationError);
  CHECK_THROWS_AS(system_from_string(R"({"p": [0.5, 0.5]})"), ValidationError);
}

TEST_CASE("sample file round trip") {
  const auto batch = sample_dcs(random_system(3, 3, 3, 2), 500, 4);
  const auto text = samples_to_string(batch);
  CHECK(text.rfind("t,y1,y2,y3\n1,", 0) == 0);
  CHECK(samples_from_string(text, 3) == batch);
}

TEST_CASE("sample file validation") {
  CHECK(samples_from_string("t,y1,y2\n1,1,2\n2,2,2\n").output_size() == 2);
  CHECK(samples_from_string("t,y1,y2\n1,1,1\n", 4).output_size() == 4);
  CHECK_THROWS_AS(samples_from_string("t,y1,y2\n1,0,2\n"), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,y1,y2\n1,3,2\n", 2), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,y1,y2\n2,1,2\n"), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,y1,y2\n1,1,2\n1,1,2\n"), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,y1,y2\n1,1\n"), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,a,b\n1,1,1\n"), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,y1\n"), ValidationError);
  CHECK_THROWS_AS(samples_from_string(""), ValidationError);
  CHECK_THROWS_AS(samples_from_string("t,y1\n1,x\n"), ValidationError);
}

TEST_CASE("tensor file round trip") {
  const auto q = theta(random_system(2, 3, 3, 5));
  CHECK(tensor_from_string(tensor_to_string(q)) == q);
  CHECK_THROWS_AS(tensor_from_string(R"({"shape": [2], "values": [1]})"), ValidationError);
}

TEST_CASE("result file round trip") {
  InversionConfig c;
  c.hidden_size = 2;
  c.restarts = 3;
  c.seed = 17;
  c.objective = Objective::kl;
  const auto r = invert_theta(theta(random_system(2, 2, 3, 1)), c);
  const auto text = result_to_string({r, c});
  const auto back = result_from_string(text);
  CHECK(back.result.system == r.system);
  CHECK(back.result.objective_value == r.objective_value);
  CHECK(back.result.restarts.size() == 3);
  CHECK(back.config.seed == 17);
  CHECK(back.config.objective == Objective::kl);
  CHECK(back.version == kVersion);
  CHECK(result_to_string(back) == text);
}

TEST_CASE("atomic writes and read errors") {
  const auto dir = scratch_dir();
  const auto path = dir / "system.json";
  const auto s = random_system(2, 2, 3, 3);
  save_system(path, s);
  CHECK(load_system(path) == s);
  save_system(path, random_system(2, 2, 3, 4));
  CHECK(load_system(path) == random_system(2, 2, 3, 4));
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    CHECK(entry.path().filename() == "system.json");
  }
  CHECK_THROWS_AS(read_file(dir / "missing.json"), IoError);
  CHECK_THROWS_AS(write_file_atomic(dir / "no_such_dir" / "x.json", "{}"), IoError);
  std::filesystem::remove_all(dir);
}
