#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "mtlab/error.hpp"
#include "mtlab/measures.hpp"
#include "mtlab/rng.hpp"

using namespace mtlab;
using namespace mtlab::measures;
using skew::Polynomial;
constexpr double pi = std::numbers::pi;

namespace {

std::shared_ptr<const coords::ExpandingModel> tent() {
  static auto m = std::make_shared<const coords::ExpandingModel>(mt::certify(2.0, 2, 1));
  return m;
}

const mt::MTCertificate& fiber_b() {
  static const auto c = mt::find_mt_parameter(3, 1, {1.5, 1.6});
  return c;
}

skew::SkewSystem system(double alpha = 1e-3) {
  return skew::build_system(tent(), fiber_b(), alpha, Polynomial({0.0, 1.0}));
}

// Plain Ulam matrix of y -> b - y^2 on n cells of [-sqrt(2b), sqrt(2b)],
// iterated lazily to its fixed point.
std::vector<double> fiber_ulam_density(double b, int n, int samples) {
  const double lo = -std::sqrt(2 * b);
  const double w = -2 * lo / n;
  std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
  for (int j = 0; j < n; ++j)
    for (int s = 0; s < samples; ++s) {
      const double y = lo + (j + (s + 0.5) / samples) * w;
      const int t = std::clamp(static_cast<int>(std::floor((b - y * y - lo) / w)), 0, n - 1);
      P[t][j] += 1.0 / samples;
    }
  std::vector<double> d(n, 1.0 / n), e(n);
  for (int it = 0; it < 20000; ++it) {
    for (int i = 0; i < n; ++i) {
      e[i] = 0.5 * d[i];
      for (int j = 0; j < n; ++j) e[i] += 0.5 * P[i][j] * d[j];
    }
    std::swap(d, e);
  }
  return d;
}

}  // namespace

TEST_CASE("line fit") {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("power iteration on toy operators") {
  // two disconnected 2-cycles: every start converges, limits depend on the start
  StochasticOperator P;
  P.n = 4;
  P.start = {0, 1, 2, 3, 4};
  P.row = {1, 0, 3, 2};
  P.weight = {1, 1, 1, 1};
  CHECK(P.column_sum_error() == 0.0);
  const auto u = uniqueness_diagnostic(P, 4, 9);
  CHECK(u.max_distance > 0.1);
  // the lazy iteration settles even though P itself has eigenvalue -1
  const auto r = stationary(P, {1, 0, 0, 0});
  CHECK(r.converged);
  CHECK(r.density[0] == doctest::Approx(0.5));
  CHECK(r.density[1] == doctest::Approx(0.5));
  const auto a = stationary(P, {0.3, 0.1, 0.4, 0.2});
  const auto b = stationary(P, {0.3, 0.1, 0.4, 0.2});
  CHECK(l1_distance(a.density, b.density) == 0.0);
  CHECK_THROWS_AS(uniqueness_diagnostic(P, 1, 0), Error);
}

TEST_CASE("base Ulam operator at a = 2 keeps Lebesgue") {
  const auto P = base_ulam_operator(*tent(), 64, 64, 1);
  CHECK(P.column_sum_error() < 1e-12);
  const auto r = stationary(P, std::vector<double>(64, 1.0));
  REQUIRE(r.converged);
  const double w = pi / 64;
  for (double d : r.density) CHECK(std::abs(d - 1.0 / 64) <= 2 * w / 64);
}

TEST_CASE("arcsine law maps to uniform theta") {
  // x = 2 cos(pi U) has density 1 / (pi sqrt(4 - x^2))
  const auto& model = *tent();
  constexpr int kBins = 32;
  constexpr int kSamples = 200000;
  std::vector<int> hist(kBins, 0);
  CounterRng rng(3, 0);
  for (int i = 0; i < kSamples; ++i) {
    const double x = 2 * std::cos(pi * rng.uniform());
    const double t = model.u(x);
    ++hist[std::clamp(static_cast<int>((t + pi / 2) / pi * kBins), 0, kBins - 1)];
  }
  const double expect = static_cast<double>(kSamples) / kBins;
  for (int h : hist) CHECK(std::abs(h - expect) < 5 * std::sqrt(expect));
}

TEST_CASE("Ulam estimate of the skew product") {
  const auto sys = system();
  const auto u = build_ulam(sys, 64, 32, 64, 1);
  CHECK(u.op.column_sum_error() < 1e-12);
  CHECK(u.converged);
  CHECK(u.residual < 1e-6);
  double total = 0.0;
  for (double d : u.density) {
    CHECK(d >= 0.0);
    total += d;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // the base is exactly Lebesgue-preserving and the strata map onto whole cells
  for (double m : theta_marginal(u)) CHECK(std::abs(m * 64 - 1.0) < 1e-9);
  const auto q = uniqueness_diagnostic(u.op, 3, 5);
  CHECK(q.max_distance < 1e-3);
}

TEST_CASE("decoupled Ulam estimate is a product") {
  const auto sys = system(0.0);
  const auto u = build_ulam(sys, 32, 64, 64, 2);
  REQUIRE(u.converged);
  double dev = 0.0;
  for (double m : theta_marginal(u)) dev += std::abs(m - 1.0 / 32);
  CHECK(dev < 1e-2);
  const auto ref = fiber_ulam_density(sys.b(), 64, 512);
  CHECK(l1_distance(y_marginal(u), ref) < 1e-2);
}

TEST_CASE("attractor cells") {
  const auto sys = system();
  const auto a0 = attractor(sys, 0, 64, 64);
  CHECK(a0.count() == a0.grid.size());
  const auto a1 = attractor(sys, 1, 64, 64);
  const auto a2 = attractor(sys, 2, 64, 64);
  const auto a3 = attractor(sys, 3, 64, 64);
  CHECK(a1.count() <= a0.count());
  CHECK(a2.count() <= a1.count());
  CHECK(a3.count() <= a2.count());
  CHECK(symmetric_difference(a2, a3) <= 0.01);
  // one step: the fiber over every column is [-b, b] shifted by at most alpha
  const double b = sys.b();
  const int rows = a1.grid.row(b + 1e-3) - a1.grid.row(-b - 1e-3) + 1;
  CHECK(static_cast<double>(a1.count()) / 64 <= rows);
  CHECK(static_cast<double>(a1.count()) / 64 >= rows - 2);
}

TEST_CASE("slow recurrence bookkeeping") {
  const auto sys = system();
  SlowRecurrenceOptions o;
  o.n_list = {100, 1000};
  o.eta = 0.0134;
  o.burn_in = 10;
  const auto r = slow_recurrence(sys, o);
  CHECK(r.delta == doctest::Approx(0.1 * std::pow(1e-3, 1 - 2 * 0.0134)));
  CHECK(r.big_delta == static_cast<int>(std::floor(std::log(1 / r.delta) / std::log(8.0))));
  for (const auto& s : r.sums) CHECK(s[1] >= s[0]);

  o.epsilon = 1e3;
  const auto none = slow_recurrence(sys, o);
  for (double f : none.fractions) CHECK(f == 0.0);
  CHECK_FALSE(none.fit_valid);

  o.epsilon = 1e-3;
  o.delta_tilde = 1e-12;
  const auto never = slow_recurrence(sys, o);
  for (const auto& s : never.sums) CHECK(s[1] == 0.0);

  o.orbits = 10;
  CHECK_THROWS_AS(slow_recurrence(sys, o), Error);
}

TEST_CASE("critical return fractions") {
  const auto sys = system();
  const auto chain = curves::random_chain(sys.base(), 0, 1, 3, 0);
  const auto Y = critical_return_curve(sys, chain, 1);
  CHECK(Y.depth() == 1);
  // the targeted curve crosses zero after one step at the element midpoint
  const double mid = Y.X.domain().mid();
  CHECK(std::abs(sys(mid, Y.X(mid)).second) < 1e-9);
  std::vector<double> r;
  for (int k = 0; k <= 10; ++k) r.push_back(3.0 + 0.5 * k);
  r.push_back(40.0);
  const auto res = critical_return_test(sys, Y, 1, r, 20000, 1);
  for (std::size_t k = 1; k < res.fractions.size(); ++k) CHECK(res.fractions[k] <= res.fractions[k - 1]);
  CHECK(res.fractions.back() == 0.0);
  const std::vector<double> rfit(r.begin(), r.end() - 1);
  const auto fit = critical_return_test(sys, Y, 1, rfit, 20000, 1);
  CHECK(fit.fit_valid);
  CHECK(fit.beta0 > 0.5);
  CHECK(fit.r2 > 0.9);
}

TEST_CASE("vertical exponent against the bounds") {
  const auto sys = system();
  const auto lyap = skew::lyapunov_exponents(sys, 8, 200000, 1000, 4);
  const auto c = skew::compute_constants(1e-3, 1.45);
  const auto rep = vertical_exponent_vs_bound(sys, lyap, c);
  CHECK(rep.bound == doctest::Approx(0.5 * c.eta * std::log(1.45)));
  CHECK(rep.lambda_ok);
  CHECK(rep.inv_norm_ok);
  CHECK(rep.per_orbit_violations == 0);

  // alpha = 0, b = 2: the inverse-norm average tends to -log 2
  const auto full = mt::certify(2.0, 2, 1);
  const auto dec = skew::build_system(tent(), full, 0.0, Polynomial({0.0, 1.0}));
  const auto l2 = skew::lyapunov_exponents(dec, 2, 1000000, 100, 6);
  for (const auto& o : l2.orbits) CHECK(std::abs(o.inv_norm_average + std::log(2.0)) < 2e-2);
}
