#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtlab/error.hpp"
#include "mtlab/mt_params.hpp"

using namespace mtlab;
using namespace mtlab::mt;

namespace {

// Independent oracle: real root of c^3 - 2c^2 + 2c - 2 by plain bisection.
double cubic_root() {
  auto f = [](long double c) { return c * c * c - 2 * c * c + 2 * c - 2; };
  long double lo = 1.5L, hi = 1.6L;
  for (int i = 0; i < 200; ++i) {
    long double mid = (lo + hi) / 2;
    (f(lo) < 0) == (f(mid) < 0) ? lo = mid : hi = mid;
  }
  return static_cast<double>((lo + hi) / 2);
}

}  // namespace

TEST_CASE("quadratic iteration") {
  CHECK(iterate_quadratic(QuadraticParam(2.0), 0.0, 1) == 2.0);
  CHECK(iterate_quadratic(QuadraticParam(2.0), 0.0, 3) == -2.0);
  long double c = 1.5436890127L, x = 0;
  for (int i = 0; i < 4; ++i) x = c - x * x;
  CHECK(iterate_quadratic(QuadraticParam(1.5436890127), 0.0, 4) ==
        doctest::Approx(static_cast<double>(x)).epsilon(1e-12));
  CHECK(static_cast<double>(x) == doctest::Approx(0.8392867552).epsilon(1e-9));
  CHECK_THROWS_AS(QuadraticParam(1.0), Error);
  CHECK_THROWS_AS(QuadraticParam(2.1), Error);
}

TEST_CASE("finder: c = 2") {
  const auto cert = find_mt_parameter(2, 1, {1.9, 2.0});
  CHECK(cert.param.value() == 2.0);
  CHECK(cert.residual == 0.0);
  CHECK(cert.strictness_gap > kStrictnessTolerance);
}

TEST_CASE("finder: preperiod 3 period 1") {
  const auto cert = find_mt_parameter(3, 1, {1.5, 1.6});
  CHECK(std::abs(cert.param.value() - cubic_root()) < 1e-12);
  CHECK(cert.residual < kRootTolerance);
  const double c = cert.param.value();
  const double q3 = iterate_quadratic(cert.param, 0.0, 3);
  CHECK(std::abs(quadratic(c, q3) - q3) < 1e-10);
  // determinism
  const auto again = find_mt_parameter(3, 1, {1.5, 1.6});
  CHECK(again.param.value() == c);
}

TEST_CASE("finder errors") {
  try {
    find_mt_parameter(2, 1, {1.1, 1.3});
    FAIL("expected NoSignChange");
  } catch (const Error& e) {
    CHECK(e.kind() == "NoSignChange");
  }
  // c = 2 solved with preperiod 3: orbit 0,2,-2,-2 repeats, not strict.
  try {
    find_mt_parameter(3, 1, {1.9, 2.0});
    FAIL("expected StrictnessViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == "StrictnessViolation");
  }
}

TEST_CASE("post-critical set") {
  const auto pc2 = postcritical_set(certify(2.0, 2, 1));
  REQUIRE(pc2.points.size() == 2);
  CHECK(pc2.points[0] == -2.0);
  CHECK(pc2.points[1] == 2.0);

  const auto cert = certify(1.5436890127, 3, 1);
  const auto pc = postcritical_set(cert);
  REQUIRE(pc.points.size() == 3);
  CHECK(pc.points[0] == doctest::Approx(-0.8392867552).epsilon(1e-9));
  CHECK(pc.points[1] == doctest::Approx(0.8392867552).epsilon(1e-9));
  CHECK(pc.points[2] == doctest::Approx(1.5436890127).epsilon(1e-9));
  const double c = cert.param.value();
  for (double v : pc.points) {
    const double q = quadratic(c, v);
    double best = 1.0;
    for (double w : pc.points) best = std::min(best, std::abs(q - w));
    CHECK(best < 1e-10);
  }
  const auto j = to_json(cert);
  CHECK(j["postcritical"].size() == 3);
  CHECK(j["preperiod"] == 3);
}
