#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "mtlab/config.hpp"
#include "mtlab/error.hpp"

using namespace mtlab;

namespace {

std::string error_of(const std::string& text) {
  try {
    config::parse(text);
  } catch (const Error& e) {
    CHECK(e.kind() == "ConfigError");
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("preset round-trips through its text form") {
  const auto c = config::preset("default");
  const auto back = config::parse(config::to_text(c));
  CHECK(config::to_json(back) == config::to_json(c));
  CHECK_FALSE(c.system.b.value.has_value());
  CHECK(c.system.a.value == 2.0);
}

TEST_CASE("overrides apply on top of the base") {
  const auto c = config::parse("[system]\nalpha = 0.01 ; inline comment\nphi = 0, 1, 0, -0.1\n"
                               "# comment\n[run]\nseed = 7\n");
  CHECK(c.system.alpha == 0.01);
  CHECK(c.system.phi.size() == 4);
  CHECK(c.system.phi[3] == -0.1);
  CHECK(c.run.seed == 7);
  CHECK(c.curves.count == 50);
}

TEST_CASE("a = find resolves by bisection") {
  const auto c = config::parse("[system]\na = find\n");
  CHECK_FALSE(c.system.a.value.has_value());
  const auto cert = c.system.a.resolve();
  CHECK(cert.param.value() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("bad input names the key and its range") {
  CHECK(error_of("[curves]\ncount = 0\n").find("[curves] count") != std::string::npos);
  CHECK(error_of("[system]\nalpha = 2\n").find("alpha") != std::string::npos);
  CHECK(error_of("[system]\nalpha = abc\n").find("expected") != std::string::npos);
  CHECK(error_of("[system]\ngamma = 1\n").find("unknown key 'gamma'") != std::string::npos);
  CHECK(error_of("[nonsense]\nx = 1\n").find("unknown section") != std::string::npos);
  CHECK(error_of("[curves]\ndepth_min = 9\ndepth_max = 6\n").find("depth_min") != std::string::npos);
  CHECK(error_of("[recurrence]\nn = 1000, 1000\n").find("increasing") != std::string::npos);
  CHECK_THROWS_AS(config::preset("fast"), Error);
  CHECK_THROWS_AS(config::load("/nonexistent/file.ini"), Error);
}
