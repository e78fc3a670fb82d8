#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mtlab/config.hpp"
#include "mtlab/error.hpp"
#include "mtlab/runner.hpp"

using namespace mtlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mtlab_test_runner_" + name);
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

config::ExperimentConfig small(const fs::path& out) {
  auto c = config::parse(R"(
[lyapunov]
orbits = 4
steps = 20000
[curves]
count = 4
depth_min = 2
depth_max = 3
[measure]
n_theta = 32
n_y = 16
samples = 32
[recurrence]
orbits = 1000
n = 1000, 2000
samples = 10000
)");
  c.run.out = out.string();
  return c;
}

}  // namespace

TEST_CASE("sha256 of a known string") {
  const auto p = scratch("sha") ;
  fs::create_directories(p);
  std::ofstream(p / "abc.txt", std::ios::binary) << "abc";
  CHECK(runner::sha256_file(p / "abc.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("find-param writes both certificates") {
  const auto out = scratch("find");
  auto cfg = small(out);
  const auto m = runner::run("find-param", cfg);
  CHECK(m["outputs"].size() == 1);
  const auto c = read_json(out / "certificates.json");
  CHECK(c["a"]["c"].get<double>() == 2.0);
  const double b = c["b"]["c"];
  CHECK(std::abs(b * b * b - 2 * b * b + 2 * b - 2) < 1e-12);
  CHECK_FALSE(m["config"]["run"].contains("out"));
}

TEST_CASE("decoupled lyapunov run gives log 2 on the fiber") {
  const auto out = scratch("decoupled");
  auto cfg = config::parse("[system]\nb = 2\nb_preperiod = 2\nalpha = 0\n[lyapunov]\norbits = 4\nsteps = 200000\n");
  cfg.run.out = out.string();
  runner::run("lyapunov", cfg);
  const auto s = read_json(out / "lyapunov_summary.json");
  CHECK(s["lambda_y"]["mean"].get<double>() == doctest::Approx(std::numbers::ln2).epsilon(0.02));
  CHECK(s["lambda_theta"]["mean"].get<double>() == doctest::Approx(3 * std::numbers::ln2).epsilon(1e-12));
  CHECK_FALSE(s.contains("constants"));
}

TEST_CASE("repeated runs are byte-identical and verify detects tampering") {
  const auto o1 = scratch("rep1"), o2 = scratch("rep2");
  const auto m1 = runner::run("all", small(o1));
  const auto m2 = runner::run("all", small(o2));
  CHECK(runner::comparable(m1) == runner::comparable(m2));
  CHECK(m1["outputs"].size() > 15);

  auto v = runner::verify(o1);
  CHECK(v.ok());
  CHECK(v.checked == m1["outputs"].size());
  std::ofstream(o1 / "measure_density.csv") << "tampered\n";
  fs::remove(o1 / "curves_linear.json");
  v = runner::verify(o1);
  CHECK_FALSE(v.ok());
  CHECK(v.mismatched == std::vector<std::string>{"measure_density.csv"});
  CHECK(v.missing == std::vector<std::string>{"curves_linear.json"});
}

TEST_CASE("curve and recurrence commands refuse alpha = 0") {
  const auto out = scratch("alpha0");
  auto cfg = small(out);
  cfg.system.alpha = 0.0;
  CHECK_THROWS_AS(runner::run("curves", cfg), Error);
  CHECK_THROWS_AS(runner::run("recurrence", cfg), Error);
  CHECK_THROWS_AS(runner::run("bogus", cfg), Error);
}
