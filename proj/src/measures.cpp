#include "mtlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/rng.hpp"

namespace mtlab::measures {

// ---------------------------------------------------------------- grid

int CellGrid::column(double t) const noexcept {
  const int i = static_cast<int>(std::floor((t - theta.lo) / d_theta()));
  return std::clamp(i, 0, n_theta - 1);
}

int CellGrid::row(double v) const noexcept {
  const int j = static_cast<int>(std::floor((v - y.lo) / d_y()));
  return std::clamp(j, 0, n_y - 1);
}

CellGrid system_grid(const skew::SkewSystem& sys, int n_theta, int n_y) {
  if (n_theta < 1 || n_y < 1) fail("ConfigError", "grid sizes must be positive");
  return {sys.base().I_a(), sys.fiber_interval(), n_theta, n_y};
}

// ---------------------------------------------------------------- operator

void StochasticOperator::apply(std::span<const double> in, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const double m = in[c];
    if (m == 0.0) continue;
    for (std::uint64_t k = start[c]; k < start[c + 1]; ++k) out[row[k]] += weight[k] * m;
  }
}

double StochasticOperator::column_sum_error() const {
  double worst = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double s = 0.0;
    for (std::uint64_t k = start[c]; k < start[c + 1]; ++k) s += weight[k];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

PowerResult stationary(const StochasticOperator& P, std::vector<double> start,
                       const PowerOptions& opts) {
  if (start.size() != P.n) fail("ConfigError", "start vector does not match the operator");
  const double total = std::accumulate(start.begin(), start.end(), 0.0);
  if (!(total > 0.0)) fail("ConfigError", "start vector has no mass");
  for (double& v : start) v /= total;

  PowerResult res;
  std::vector<double> next(P.n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    P.apply(start, next);
    double step = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < P.n; ++i) {
      const double v = 0.5 * (start[i] + next[i]);
      step += std::abs(v - start[i]);
      next[i] = v;
      mass += v;
    }
    // renormalize so rounding drift in the total does not accumulate
    for (double& v : next) v /= mass;
    std::swap(start, next);
    res.iterations = it;
    res.last_step = step;
    if (it % 10 == 0) res.log.push_back(step);
    if (step < opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.density = std::move(start);
  return res;
}

namespace {

// Appends the aggregated column for a list of target indices.
void aggregate(std::vector<std::uint32_t>& targets, std::size_t samples,
               std::vector<std::pair<std::uint32_t, double>>& out) {
  std::sort(targets.begin(), targets.end());
  const double w = 1.0 / static_cast<double>(samples);
  for (std::size_t k = 0; k < targets.size();) {
    std::size_t e = k;
    while (e < targets.size() && targets[e] == targets[k]) ++e;
    out.emplace_back(targets[k], static_cast<double>(e - k) * w);
    k = e;
  }
}

StochasticOperator assemble(std::vector<std::vector<std::pair<std::uint32_t, double>>>& cols) {
  StochasticOperator P;
  P.n = cols.size();
  P.start.assign(P.n + 1, 0);
  for (std::size_t c = 0; c < P.n; ++c) P.start[c + 1] = P.start[c] + cols[c].size();
  P.row.reserve(P.start.back());
  P.weight.reserve(P.start.back());
  for (auto& col : cols) {
    for (const auto& [r, w] : col) {
      P.row.push_back(r);
      P.weight.push_back(w);
    }
    col.clear();
    col.shrink_to_fit();
  }
  return P;
}

// F(theta, y) at binning accuracy: one inversion to x, m1 quadratic steps,
// one evaluation of u. Rounding near post-critical points costs about
// sqrt(eps) in theta, far below any cell width.
std::pair<double, double> coarse_step(const skew::SkewSystem& sys, double theta, double y) {
  const auto& model = sys.base();
  const double x = model.x_of_theta(theta);
  double z = x;
  for (int k = 0; k < model.m1(); ++k) z = model.a() - z * z;
  z = std::clamp(z, model.x_lo(), model.x_hi());
  return {model.u(z), sys.fiber_map(y) + sys.alpha() * sys.phi_x(x)};
}

int strata(int samples_per_cell) {
  if (samples_per_cell < 32) fail("ConfigError", "samples_per_cell must be >= 32");
  return static_cast<int>(std::floor(std::sqrt(static_cast<double>(samples_per_cell)) + 1e-9));
}

}  // namespace

StochasticOperator ulam_operator(const skew::SkewSystem& sys, const CellGrid& grid,
                                 int samples_per_cell, std::uint64_t seed, int workers) {
  if (grid.n_theta < 16 || grid.n_y < 16) fail("ConfigError", "Ulam grid must be at least 16 x 16");
  const int k = strata(samples_per_cell);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> cols(grid.size());
  parallel_for(static_cast<std::size_t>(grid.n_theta), workers, [&](std::size_t i) {
    std::vector<std::uint32_t> targets;
    for (int j = 0; j < grid.n_y; ++j) {
      const std::size_t c = i * grid.n_y + j;
      CounterRng rng(seed, c);
      targets.clear();
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          const double t = grid.theta.lo + (i + (a + rng.uniform()) / k) * grid.d_theta();
          const double y = grid.y.lo + (j + (b + rng.uniform()) / k) * grid.d_y();
          const auto [t1, y1] = coarse_step(sys, t, y);
          targets.push_back(static_cast<std::uint32_t>(grid.cell(t1, y1)));
        }
      aggregate(targets, static_cast<std::size_t>(k) * k, cols[c]);
    }
  });
  return assemble(cols);
}

StochasticOperator base_ulam_operator(const coords::ExpandingModel& model, int n_theta,
                                      int samples_per_cell, std::uint64_t seed) {
  if (n_theta < 16) fail("ConfigError", "Ulam grid must have at least 16 cells");
  const int k = strata(samples_per_cell);
  const CellGrid grid{model.I_a(), {0.0, 1.0}, n_theta, 1};
  std::vector<std::vector<std::pair<std::uint32_t, double>>> cols(grid.size());
  std::vector<std::uint32_t> targets;
  for (int i = 0; i < n_theta; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    targets.clear();
    for (int a = 0; a < k * k; ++a) {
      const double t = grid.theta.lo + (i + (a + rng.uniform()) / (k * k)) * grid.d_theta();
      targets.push_back(static_cast<std::uint32_t>(grid.column(model.h(t))));
    }
    aggregate(targets, static_cast<std::size_t>(k) * k, cols[i]);
  }
  return assemble(cols);
}

UlamEstimate build_ulam(const skew::SkewSystem& sys, int n_theta, int n_y, int samples_per_cell,
                        std::uint64_t seed, int workers, const PowerOptions& opts) {
  UlamEstimate u;
  u.grid = system_grid(sys, n_theta, n_y);
  u.op = ulam_operator(sys, u.grid, samples_per_cell, seed, workers);
  auto p = stationary(u.op, std::vector<double>(u.op.n, 1.0), opts);
  u.iterations = p.iterations;
  u.converged = p.converged;
  u.log = std::move(p.log);
  u.density = std::move(p.density);
  std::vector<double> image(u.op.n);
  u.op.apply(u.density, image);
  u.residual = l1_distance(image, u.density);
  return u;
}

std::vector<double> theta_marginal(const UlamEstimate& u) {
  std::vector<double> m(u.grid.n_theta, 0.0);
  for (int i = 0; i < u.grid.n_theta; ++i)
    for (int j = 0; j < u.grid.n_y; ++j) m[i] += u.density[static_cast<std::size_t>(i) * u.grid.n_y + j];
  return m;
}

std::vector<double> y_marginal(const UlamEstimate& u) {
  std::vector<double> m(u.grid.n_y, 0.0);
  for (int i = 0; i < u.grid.n_theta; ++i)
    for (int j = 0; j < u.grid.n_y; ++j) m[j] += u.density[static_cast<std::size_t>(i) * u.grid.n_y + j];
  return m;
}

UniquenessResult uniqueness_diagnostic(const StochasticOperator& P, int n_starts, std::uint64_t seed,
                                       const PowerOptions& opts) {
  if (n_starts < 2) fail("ConfigError", "uniqueness diagnostic needs at least two starts");
  std::vector<std::vector<double>> limits;
  UniquenessResult res;
  for (int s = 0; s < n_starts; ++s) {
    CounterRng rng(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(s));
    std::vector<double> start(P.n);
    for (double& v : start) v = rng.uniform();
    auto p = stationary(P, std::move(start), opts);
    if (!p.converged) {
      std::ostringstream os;
      os << "start " << s << " still moving by " << p.last_step << " after " << p.iterations
         << " iterations";
      fail("NotConverged", os.str());
    }
    res.iterations.push_back(p.iterations);
    limits.push_back(std::move(p.density));
  }
  for (int a = 0; a < n_starts; ++a)
    for (int b = a + 1; b < n_starts; ++b) {
      const double d = l1_distance(limits[a], limits[b]);
      res.pairwise.push_back(d);
      res.max_distance = std::max(res.max_distance, d);
    }
  return res;
}

// ---------------------------------------------------------------- attractor

std::size_t AttractorEstimate::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

namespace {

struct FiberImages {
  const skew::SkewSystem& sys;
  std::vector<std::vector<const coords::InverseBranch*>> by_target;

  explicit FiberImages(const skew::SkewSystem& s) : sys(s) {
    const auto& model = sys.base();
    by_target.resize(model.level0().size());
    for (std::size_t e = 0; e < model.level0().size(); ++e)
      for (const auto& br : model.p1_children(e)) by_target[br.target()].push_back(&br);
  }

  // Fiber intervals of F^n(rectangle) over the point with base coordinate x
  // on level-0 element e.
  void collect(double x, std::size_t e, int n, std::vector<Interval>& out) const {
    if (n == 0) {
      out.push_back(sys.fiber_interval());
      return;
    }
    for (const auto* br : by_target[e]) {
      const double z = br->pull_x(x);
      std::vector<Interval> pre;
      collect(z, br->source(), n - 1, pre);
      const double shift = sys.alpha() * sys.phi_x(z);
      for (const auto& J : pre) {
        const double m2 = std::max(J.lo * J.lo, J.hi * J.hi);
        const double n2 = (J.lo <= 0.0 && J.hi >= 0.0) ? 0.0 : std::min(J.lo * J.lo, J.hi * J.hi);
        out.push_back({sys.b() - m2 + shift, sys.b() - n2 + shift});
      }
    }
  }
};

}  // namespace

AttractorEstimate attractor(const skew::SkewSystem& sys, int n, int n_theta, int n_y, int probes) {
  if (n < 0) fail("ConfigError", "attractor iterate count must be >= 0");
  AttractorEstimate a;
  a.n = n;
  a.grid = system_grid(sys, n_theta, n_y);
  a.cells.assign(a.grid.size(), 0);
  if (n == 0) {
    std::fill(a.cells.begin(), a.cells.end(), std::uint8_t{1});
    return a;
  }
  const FiberImages images(sys);
  const auto& model = sys.base();
  const double inset = 1e-9 * a.grid.d_theta();
  std::vector<Interval> fibers;
  for (int i = 0; i < n_theta; ++i) {
    const double t0 = a.grid.theta.lo + i * a.grid.d_theta();
    std::vector<double> ts{t0 + inset, t0 + a.grid.d_theta() - inset};
    for (int q = 0; q < probes; ++q) ts.push_back(t0 + (q + 0.5) / probes * a.grid.d_theta());
    for (double t : ts) {
      fibers.clear();
      images.collect(model.x_of_theta(t), model.element_containing(t), n, fibers);
      for (const auto& J : fibers) {
        const int r0 = a.grid.row(J.lo);
        const int r1 = a.grid.row(J.hi);
        for (int r = r0; r <= r1; ++r) a.cells[static_cast<std::size_t>(i) * n_y + r] = 1;
      }
    }
  }
  return a;
}

double symmetric_difference(const AttractorEstimate& a, const AttractorEstimate& b) {
  if (a.cells.size() != b.cells.size()) fail("ConfigError", "attractor grids differ");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) d += a.cells[i] != b.cells[i];
  return static_cast<double>(d) / static_cast<double>(a.cells.size());
}

// ---------------------------------------------------------------- fits

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail("ConfigError", "line fit needs two or more points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

// ---------------------------------------------------------------- recurrence

SlowRecurrenceResult slow_recurrence(const skew::SkewSystem& sys, const SlowRecurrenceOptions& opts) {
  if (opts.orbits < 1000) fail("ConfigError", "slow recurrence needs an ensemble of >= 1000 orbits");
  if (opts.n_list.empty() || !std::is_sorted(opts.n_list.begin(), opts.n_list.end()) ||
      opts.n_list.front() <= 0)
    fail("ConfigError", "n_list must be positive and increasing");
  if (!(opts.delta_tilde > 0.0 && opts.delta_tilde < 0.5))
    fail("ConfigError", "delta_tilde must lie in (0, 1/2)");
  if (!(opts.epsilon > 0.0)) fail("ConfigError", "epsilon must be positive");

  SlowRecurrenceResult res;
  res.n_list = opts.n_list;
  res.delta = opts.delta_tilde * std::pow(sys.alpha(), 1.0 - 2.0 * opts.eta);
  if (!(res.delta < 1.0)) fail("ConfigError", "delta = delta_tilde alpha^(1-2 eta) must be < 1");
  res.big_delta = static_cast<int>(std::floor(std::log(1.0 / res.delta) / std::log(sys.base().lambda_g())));

  skew::OrbitOptions oo;
  oo.burn_in = opts.burn_in;
  oo.delta = res.delta;
  oo.checkpoints = opts.n_list;
  res.sums.resize(opts.orbits);
  parallel_for(opts.orbits, opts.workers, [&](std::size_t i) {
    const auto [t0, y0] = skew::initial_condition(sys, opts.seed, i);
    res.sums[i] = skew::iterate(sys, t0, y0, opts.n_list.back(), oo).checkpoint_sums;
  });

  const double N = static_cast<double>(opts.orbits);
  std::vector<double> sq, lf;
  for (std::size_t k = 0; k < opts.n_list.size(); ++k) {
    const double n = static_cast<double>(opts.n_list[k]);
    std::size_t over = 0;
    double s1 = 0.0, s2 = 0.0;
    for (const auto& s : res.sums) {
      over += s[k] > opts.epsilon * n;
      s1 += s[k] / n;
      s2 += (s[k] / n) * (s[k] / n);
    }
    const double mean = s1 / N;
    res.fractions.push_back(static_cast<double>(over) / N);
    res.mean_rate.push_back(mean);
    res.rate_stderr.push_back(std::sqrt(std::max(0.0, s2 / N - mean * mean) / (N - 1)));
    if (over > 0) {
      sq.push_back(std::sqrt(n));
      lf.push_back(std::log(res.fractions.back()));
    }
  }
  res.fit_valid = sq.size() == opts.n_list.size() && sq.size() >= 2;
  if (sq.size() >= 2) {
    const auto f = fit_line(sq, lf);
    res.slope = f.slope;
    res.intercept = f.intercept;
    res.r2 = f.r2;
  }
  return res;
}

namespace {

double fiber_after(const skew::SkewSystem& sys, double theta, double y, int m) {
  for (int i = 0; i < m; ++i) std::tie(theta, y) = sys(theta, y);
  return y;
}

}  // namespace

curves::AdmissibleCurve critical_return_curve(const skew::SkewSystem& sys,
                                              const std::vector<coords::InverseBranch>& chain, int m) {
  if (m < 1) fail("ConfigError", "M must be >= 1");
  const auto& model = sys.base();
  const std::size_t element = chain.empty() ? model.element_containing(0.0) : chain.back().target();
  const double mid = model.level0().element(element).mid();
  auto g = [&](double y0) {
    const double y = chain.empty() ? y0 : curves::direct_value(sys, y0, chain, mid);
    return fiber_after(sys, mid, y, m);
  };
  // first sign change on a grid of y0 values, then bisection
  constexpr int kScan = 256;
  const double yb = sys.y_bound();
  double lo = 0.0, hi = 0.0;
  bool found = false;
  double prev = g(-yb);
  for (int s = 1; s <= kScan && !found; ++s) {
    const double y = -yb + 2.0 * yb * s / kScan;
    const double cur = g(y);
    if ((prev <= 0.0) != (cur <= 0.0)) {
      lo = y - 2.0 * yb / kScan;
      hi = y;
      found = true;
    }
    prev = cur;
  }
  if (!found) fail("NoSignChange", "f_M never crosses zero at the element midpoint");
  const bool neg_lo = g(lo) <= 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double c = 0.5 * (lo + hi);
    ((g(c) <= 0.0) == neg_lo ? lo : hi) = c;
  }
  const double y0 = 0.5 * (lo + hi);
  return chain.empty() ? curves::horizontal(sys, element, y0) : curves::evolve_horizontal(sys, y0, chain);
}

CriticalReturnResult critical_return_test(const skew::SkewSystem& sys,
                                          const curves::AdmissibleCurve& Y, int m,
                                          std::span<const double> r, std::size_t samples,
                                          std::uint64_t seed) {
  if (m < 1) fail("ConfigError", "M must be >= 1");
  if (samples == 0 || r.empty()) fail("ConfigError", "need samples and an r grid");
  CriticalReturnResult res;
  res.m = m;
  res.r.assign(r.begin(), r.end());
  const auto& dom = Y.X.domain();
  CounterRng rng(seed, 0xc0ffeeULL);
  std::vector<double> values(samples);
  for (auto& v : values) {
    const double t = rng.uniform(dom.lo, dom.hi);
    v = std::abs(fiber_after(sys, t, Y.X(t), m));
  }
  std::sort(values.begin(), values.end());
  std::vector<double> xs, ls;
  for (double rv : res.r) {
    const double target = std::sqrt(sys.alpha()) * std::exp(-rv);
    const auto hits = std::upper_bound(values.begin(), values.end(), target) - values.begin();
    res.fractions.push_back(static_cast<double>(hits) / static_cast<double>(samples));
    if (hits > 0) {
      xs.push_back(rv);
      ls.push_back(std::log(res.fractions.back()));
    }
  }
  res.fit_valid = xs.size() == res.r.size() && xs.size() >= 2;
  if (xs.size() >= 2) {
    const auto f = fit_line(xs, ls);
    res.beta0 = -f.slope;
    res.r2 = f.r2;
  }
  return res;
}

// ---------------------------------------------------------------- exponents

VerticalBoundReport vertical_exponent_vs_bound(const skew::SkewSystem& sys,
                                               const skew::LyapunovResult& lyap,
                                               const skew::BEConstants& constants) {
  if (lyap.orbits.empty()) fail("ConfigError", "no orbits to compare");
  VerticalBoundReport r;
  const double ls = std::log(constants.sigma);
  r.bound = 0.5 * constants.eta * ls;
  r.inv_norm_bound = -constants.eta * ls / 3.0;
  // ||DF^-1|| <= (1/|2y|)(1 + alpha |phi'| / |h'|) since |2y| <= |h'|
  r.c_matrix = curves::phi_prime_sup(sys) / sys.base().lambda_g();
  r.min_lambda_y = lyap.orbits.front().lambda_y;
  r.max_inv_norm = lyap.orbits.front().inv_norm_average;
  for (const auto& o : lyap.orbits) {
    r.min_lambda_y = std::min(r.min_lambda_y, o.lambda_y);
    r.max_inv_norm = std::max(r.max_inv_norm, o.inv_norm_average);
    if (o.inv_norm_average > r.c_matrix * sys.alpha() - o.lambda_y + 1e-12) ++r.per_orbit_violations;
  }
  r.lambda_ok = r.min_lambda_y >= r.bound;
  r.inv_norm_ok = r.max_inv_norm <= r.inv_norm_bound;
  return r;
}

nlohmann::json to_json(const SlowRecurrenceResult& r) {
  return {{"delta", r.delta},         {"Delta", r.big_delta},
          {"n", r.n_list},            {"fractions", r.fractions},
          {"mean_rate", r.mean_rate}, {"rate_stderr", r.rate_stderr},
          {"slope", r.slope},         {"intercept", r.intercept},
          {"r2", r.r2},               {"fit_valid", r.fit_valid}};
}

nlohmann::json to_json(const CriticalReturnResult& r) {
  return {{"M", r.m},   {"r", r.r},           {"fractions", r.fractions},
          {"beta0", r.beta0}, {"r2", r.r2}, {"fit_valid", r.fit_valid}};
}

nlohmann::json to_json(const VerticalBoundReport& r) {
  return {{"min_lambda_y", r.min_lambda_y},
          {"bound", r.bound},
          {"max_inv_norm_average", r.max_inv_norm},
          {"inv_norm_bound", r.inv_norm_bound},
          {"C", r.c_matrix},
          {"per_orbit_violations", r.per_orbit_violations},
          {"lambda_ok", r.lambda_ok},
          {"inv_norm_ok", r.inv_norm_ok}};
}

}  // namespace mtlab::measures
