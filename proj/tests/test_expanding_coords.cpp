#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mtlab/error.hpp"
#include "mtlab/expanding_coords.hpp"

using namespace mtlab;
using namespace mtlab::coords;
constexpr double pi = std::numbers::pi;

namespace {

const ExpandingModel& tent() {
  static const ExpandingModel m(mt::certify(2.0, 2, 1));
  return m;
}

const ExpandingModel& airplane() {
  static const ExpandingModel m(mt::find_mt_parameter(3, 1, {1.5, 1.6}));
  return m;
}

// Closed-form tent model for a = 2.
double tent_h0(double t) { return pi / 2 - 2 * std::abs(t); }

}  // namespace

TEST_CASE("metric") {
  const auto rho = build_metric(mt::postcritical_set(mt::certify(2.0, 2, 1)));
  CHECK(rho(0.0) == doctest::Approx(0.5));
  CHECK(rho(1.0) == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(rho(2.0 - 0x1p-34) * std::sqrt(0x1p-34) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS_AS(rho(2.0), Error);
}

TEST_CASE("conjugacy for a = 2 matches arcsin") {
  const auto& m = tent();
  CHECK(m.u(0.0) == 0.0);
  CHECK(std::abs(m.u(2.0) - pi / 2) < 1e-10);
  CHECK(std::abs(m.u(-1.0) - std::asin(-0.5)) < 1e-10);
  CHECK(std::abs(m.x_of_theta(pi / 6) - 1.0) < 1e-12);
  CHECK(std::abs(m.x_of_theta(pi / 2) - 2.0) < 1e-12);
  for (int i = 0; i <= 1000; ++i) {
    const double x = -2.0 + 4.0 * i / 1000;
    REQUIRE(std::abs(m.u(x) - std::asin(x / 2)) < 1e-10);
    const double t = -pi / 2 + pi * i / 1000;
    REQUIRE(std::abs(m.u(m.x_of_theta(t)) - t) < 1e-10);
    REQUIRE(std::abs(m.h0(t) - tent_h0(t)) < 1e-8);
  }
  CHECK(m.h0(pi / 4) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(m.h(0.0) + pi / 2) < 1e-10);
}

TEST_CASE("expansion constants for a = 2") {
  const auto& m = tent();
  CHECK(std::abs(m.lambda_a() - 2.0) < 1e-9);
  CHECK(m.m0() == 3);
  CHECK(m.m1() == 3);
  CHECK(m.tilde_lambda_a() == doctest::Approx((2 + std::cbrt(4.0)) / 2));
  CHECK(m.lambda_g() == doctest::Approx(8.0));
  CHECK(compute_m0(2.0) == 3);
  CHECK(compute_m0(4.1) == 1);
}

TEST_CASE("partitions for a = 2") {
  const auto& m = tent();
  const auto q0 = markov_partition(m, 0);
  CHECK(q0.size() == 1);
  const auto q1 = markov_partition(m, 1);
  REQUIRE(q1.size() == 2);
  CHECK(std::abs(q1.breakpoints[1]) < 1e-12);
  const auto q3 = markov_partition(m, 3);
  REQUIRE(q3.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(q3.element(i).length() - pi / 8) < 1e-10);
  for (int n = 0; n < 6; ++n) {
    const auto chk = check_markov(m, markov_partition(m, n), markov_partition(m, n + 1));
    CHECK(chk.nested);
    CHECK(chk.markov);
  }
  CHECK_THROWS_AS(markov_partition(m, 41), Error);
}

TEST_CASE("inverse branches for a = 2") {
  const auto& m = tent();
  const auto& kids = m.p1_children(0);
  REQUIRE(kids.size() == 8);
  for (const auto& br : kids) {
    for (int i = 1; i < 100; ++i) {
      const double t = -pi / 2 + pi * i / 100;
      REQUIRE(std::abs(m.h(br(t)) - t) < 1e-10);
      REQUIRE(std::abs(std::abs(br.derivative(t)) - 0.125) < 1e-12);
      // finite-difference oracle
      const double e = 1e-6;
      const double fd = (br(t + e) - br(t - e)) / (2 * e);
      REQUIRE(std::abs(fd - br.derivative(t)) < 1e-7);
    }
  }
  const auto q3 = markov_partition(m, 3);
  const auto br = inverse_branch(m, 0, q3.element(5), 1);
  CHECK(std::abs(br.image().lo - q3.element(5).lo) < 1e-10);
  CHECK_THROWS_AS(inverse_branch(m, 0, Interval{0.0, 0.3}, 1), Error);
}

TEST_CASE("central branches flip sign in x") {
  const auto& m = tent();
  const auto q3 = markov_partition(m, 3);
  // central elements: the two adjacent to theta = 0
  const auto left = inverse_branch(m, 0, q3.element(3), 1);
  const auto right = inverse_branch(m, 0, q3.element(4), 1);
  for (int i = 1; i < 100; ++i) {
    const double t = q3.element(4).lo + q3.element(4).length() * i / 100;
    const double img = left(m.h(t));
    CHECK(std::abs(m.x_of_theta(img) + m.x_of_theta(t)) < 1e-9);
    const double same = right(m.h(t));
    CHECK(std::abs(m.x_of_theta(same) - m.x_of_theta(t)) < 1e-9);
  }
}

TEST_CASE("distortion for a = 2") {
  const auto rep = distortion_report(tent(), 4, 500, 7);
  for (std::size_t i = 0; i < rep.ratio.size(); ++i)
    CHECK(rep.ratio[i] == doctest::Approx(rep.image_length[i] / pi).epsilon(1e-8));
  CHECK(rep.c_d >= 1.0);
  CHECK(rep.c_d < 10.0);
}

TEST_CASE("airplane parameter") {
  const auto& m = airplane();
  CHECK(m.lambda_a() > 1.0);
  CHECK(std::pow(m.lambda_a(), m.m0()) > 4.0);
  CHECK(std::pow(m.lambda_a(), m.m0() - 1) <= 4.0);
  CHECK(m.tilde_lambda_a() > std::pow(4.0, 1.0 / m.m0()));
  CHECK(m.tilde_lambda_a() < m.lambda_a());
  const double a = m.a();
  // conjugacy on a grid away from PC
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = m.x_lo() + (m.x_hi() - m.x_lo()) * i / 10000;
    bool near = false;
    for (double v : m.postcritical()) near |= std::abs(x - v) < 1e-4;
    if (near) continue;
    worst = std::max(worst, std::abs(m.u(a - x * x) - m.h0(m.u(x))));
  }
  CHECK(worst < 1e-8);
  for (int n = 0; n < 8; ++n) {
    const auto chk = check_markov(m, markov_partition(m, n), markov_partition(m, n + 1));
    CHECK(chk.nested);
    CHECK(chk.markov);
  }
  // Q maps [-p, p] onto [p, a] and back: the map is renormalizable here,
  // so the level-0 elements swap forever and no covering time exists.
  const auto& q0 = m.level0();
  REQUIRE(q0.size() == 2);
  const double p = m.postcritical()[1];
  CHECK(std::abs(a - p * p - p) < 1e-12);
  CHECK(std::abs(a - a * a + p) < 1e-12);
  const auto ex = mt::check_topological_exactness(m, 20);
  CHECK_FALSE(ex.exact);
  const auto rep = distortion_report(m, 2, 300, 3);
  CHECK(std::isfinite(rep.c_d));
}

TEST_CASE("exactness for a = 2") {
  CHECK(mt::check_topological_exactness(tent(), 10).covering_time == 0);
  CHECK(mt::check_topological_exactness(tent(), 0).exact);
}
