#include "mtlab/skew_product.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mtlab/error.hpp"
#include "mtlab/parallel.hpp"
#include "mtlab/rng.hpp"

namespace mtlab::skew {

namespace {

constexpr double kAnchorRadius = 1e-6;
constexpr int kPhiGrid = 10000;
constexpr double kPhiMargin = 1.01;

// Running product kept as mantissa and binary exponent: one frexp per step
// instead of one log.
class LogProduct {
public:
  void mul(double v) noexcept {
    int e;
    m_ = std::frexp(m_ * v, &e);
    e_ += e;
  }
  double log() const noexcept { return std::log(m_) + static_cast<double>(e_) * std::numbers::ln2; }

private:
  double m_ = 1.0;
  long e_ = 0;
};

}  // namespace

// ---------------------------------------------------------------- polynomial

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
  if (coeffs_.empty()) coeffs_.push_back(0.0);
}

double Polynomial::operator()(double x) const noexcept {
  double s = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) s = s * x + *it;
  return s;
}

double Polynomial::derivative(double x, int order) const noexcept {
  double s = 0.0;
  for (int k = degree(); k >= order; --k) {
    double f = 1.0;
    for (int j = 0; j < order; ++j) f *= k - j;
    s = s * x + f * coeffs_[k];
  }
  return s;
}

// ---------------------------------------------------------------- stepper

QuadStepper::QuadStepper(double c, std::vector<double> postcritical)
    : c_(c), pc_(std::move(postcritical)) {
  for (double v : pc_) {
    const double q = c_ - v * v;
    int best = 0;
    for (int i = 1; i < static_cast<int>(pc_.size()); ++i)
      if (std::abs(q - pc_[i]) < std::abs(q - pc_[best])) best = i;
    next_.push_back(best);
  }
}

void QuadStepper::step(QuadState& s) const noexcept {
  if (s.anchor >= 0) {
    const double p = pc_[s.anchor];
    s.offset = -s.offset * (2.0 * p + s.offset);
    s.anchor = next_[s.anchor];
    s.x = pc_[s.anchor] + s.offset;
    if (std::abs(s.offset) > kAnchorRadius) s.anchor = -1;
    return;
  }
  if (std::abs(s.x) < kAnchorRadius && !pc_.empty() && pc_.back() == c_) {
    s.anchor = static_cast<int>(pc_.size()) - 1;
    s.offset = -s.x * s.x;
    s.x = c_ + s.offset;
    return;
  }
  s.x = c_ - s.x * s.x;
}

// ---------------------------------------------------------------- system

bool rectangle_invariant(double b, double alpha) {
  // Q_b maps [-sqrt(2b), sqrt(2b)] onto [-b, b]; the coupling shifts by at
  // most alpha.
  const double bound = std::sqrt(2.0 * b);
  const double lo = mt::quadratic(b, bound) - alpha;
  const double hi = mt::quadratic(b, 0.0) + alpha;
  return lo >= -bound && hi <= bound;
}

double find_alpha_max(double b) {
  if (!rectangle_invariant(b, 0.0)) return 0.0;
  double lo = 0.0;
  double hi = 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rectangle_invariant(b, mid) ? lo : hi) = mid;
  }
  return lo;
}

SkewSystem::SkewSystem(std::shared_ptr<const coords::ExpandingModel> base,
                       const mt::MTCertificate& fiber, double alpha, Polynomial phi)
    : base_(std::move(base)),
      fiber_(fiber),
      b_(fiber.param.value()),
      alpha_(alpha),
      phi_(std::move(phi)),
      y_bound_(std::sqrt(2.0 * b_)),
      base_step_(base_->a(), base_->postcritical()),
      fiber_step_(b_, mt::postcritical_set(fiber).points) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("ConfigError", "alpha must be >= 0");
  if (phi_.constant()) fail("ConstantCoupling", "coupling polynomial must be nonconstant");
  double sup = 0.0;
  const double lo = base_->x_lo();
  const double hi = base_->x_hi();
  for (int i = 0; i <= kPhiGrid; ++i) sup = std::max(sup, std::abs(phi_(lo + (hi - lo) * i / kPhiGrid)));
  if (!(sup > 0.0)) fail("ConstantCoupling", "coupling vanishes on the base interval");
  scale_ = sup * kPhiMargin;
  alpha_max_ = find_alpha_max(b_);
  if (!rectangle_invariant(b_, alpha_)) {
    std::ostringstream os;
    os << "alpha=" << alpha_ << " breaks invariance of the rectangle; alpha_max=" << alpha_max_;
    fail("AlphaTooLarge", os.str());
  }
}

double SkewSystem::dphi(double theta) const {
  const double x = base_->x_of_theta(theta);
  return phi_.derivative(x) * base_->metric().inverse(x) / scale_;
}

std::pair<double, double> SkewSystem::operator()(double theta, double y) const {
  return {base_->h(theta), fiber_map(y) + alpha_ * phi(theta)};
}

SkewSystem SkewSystem::with_alpha(double alpha) const {
  return SkewSystem(base_, fiber_, alpha, phi_);
}

SkewSystem build_system(std::shared_ptr<const coords::ExpandingModel> base,
                        const mt::MTCertificate& fiber, double alpha, Polynomial phi) {
  return SkewSystem(std::move(base), fiber, alpha, std::move(phi));
}

// ---------------------------------------------------------------- orbits

namespace {

template <bool Coupled, bool InverseNorm>
void run(const SkewSystem& sys, OrbitAccumulator& acc, QuadState& fy, long steps, bool record,
         const OrbitOptions& opts) {
  const auto& model = sys.base();
  const auto& bstep = sys.base_stepper();
  const auto& fstep = sys.fiber_stepper();
  const int m1 = model.m1();
  const double b = sys.b();
  const double alpha = sys.alpha();
  const double bound = sys.y_bound() * (1.0 + 1e-12);
  const double delta = opts.delta;
  std::size_t next_cp = 0;
  LogProduct base_log;
  LogProduct fiber_log;
  LogProduct inv_log;
  const long n0 = acc.n;

  for (long i = 0; i < steps; ++i) {
    const double x = acc.base.x;
    const double y = fy.x;
    if (record) {
      const double ay = std::abs(y);
      if (ay < delta) {
        acc.recurrence_sum += -std::log(ay);
        if (opts.record_events) acc.events.push_back({acc.n, ay});
      }
      fiber_log.mul(2.0 * ay);
    }

    double slope = 1.0;
    for (int j = 0; j < m1; ++j) {
      slope *= model.h0_slope_x(acc.base.x);
      bstep.step(acc.base);
    }
    if (record) {
      base_log.mul(slope);
      if constexpr (InverseNorm) {
        const double q = -2.0 * y;
        const double dphi =
            sys.phi_poly().derivative(x) * model.metric().inverse(x) / sys.phi_scale();
        const double r = -alpha * dphi / (slope * q);
        inv_log.mul(lower_triangular_norm(1.0 / slope, r, 1.0 / q));
      }
    }

    if constexpr (Coupled) {
      fy.x = b - y * y + alpha * sys.phi_x(x);
    } else {
      fstep.step(fy);
    }
    if (!(std::abs(fy.x) <= bound)) {
      std::ostringstream os;
      os << "fiber value " << fy.x << " left [-" << sys.y_bound() << ", " << sys.y_bound()
         << "] at step " << acc.n;
      fail("EscapedRectangle", os.str());
    }
    if (record) {
      ++acc.n;
      while (next_cp < opts.checkpoints.size() && opts.checkpoints[next_cp] == acc.n) {
        acc.checkpoint_sums.push_back(acc.recurrence_sum);
        ++next_cp;
      }
    }
  }
  if (record && acc.n > n0) {
    acc.log_base += base_log.log();
    acc.log_fiber += fiber_log.log();
    if constexpr (InverseNorm) acc.log_inv_norm += inv_log.log();
  }
  acc.y = fy.x;
}

}  // namespace

OrbitAccumulator iterate(const SkewSystem& sys, double theta0, double y0, long n,
                         const OrbitOptions& opts) {
  if (n < 0 || opts.burn_in < 0) fail("ConfigError", "orbit lengths must be >= 0");
  if (!(std::abs(y0) <= sys.y_bound())) fail("OutOfDomain", "initial fiber value outside I^_b");
  if (!std::is_sorted(opts.checkpoints.begin(), opts.checkpoints.end()))
    fail("ConfigError", "checkpoints must be sorted");
  OrbitAccumulator acc;
  acc.base.x = sys.base().x_of_theta(theta0);
  acc.y = y0;
  QuadState fy{y0, -1, 0.0};
  const bool coupled = sys.alpha() != 0.0;
  auto go = [&](long steps, bool record) {
    if (coupled && opts.inverse_norm)
      run<true, true>(sys, acc, fy, steps, record, opts);
    else if (coupled)
      run<true, false>(sys, acc, fy, steps, record, opts);
    else if (opts.inverse_norm)
      run<false, true>(sys, acc, fy, steps, record, opts);
    else
      run<false, false>(sys, acc, fy, steps, record, opts);
  };
  go(opts.burn_in, false);
  go(n, true);
  return acc;
}

std::pair<double, double> fiber_iterate(const SkewSystem& sys, double theta0, double y0, int n) {
  const auto& model = sys.base();
  double x = model.x_of_theta(theta0);
  double y = y0;
  double d = 1.0;
  for (int i = 0; i < n; ++i) {
    d *= -2.0 * y;
    y = sys.fiber_map(y) + sys.alpha() * sys.phi_x(x);
    x = mt::iterate_quadratic(mt::QuadraticParam(model.a()), x, model.m1());
  }
  return {y, d};
}

double fiber_derivative_fd(const SkewSystem& sys, double theta0, double y0, int n) {
  // Rounding in f_n grows like |d|, so the step shrinks like 1/|d|;
  // one Richardson level removes the h^2 term.
  const double d = fiber_iterate(sys, theta0, y0, n).second;
  const double h = 1e-3 / std::max(1.0, std::abs(d));
  auto central = [&](double step) {
    const double up = fiber_iterate(sys, theta0, y0 + step, n).first;
    const double dn = fiber_iterate(sys, theta0, y0 - step, n).first;
    return (up - dn) / (2.0 * step);
  };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

// ---------------------------------------------------------------- ensembles

SampleStats sample_stats(const std::vector<double>& v) {
  SampleStats s;
  if (v.empty()) return s;
  double sum = 0.0;
  s.min = v.front();
  s.max = v.front();
  for (double x : v) {
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = sum / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return s;
}

std::pair<double, double> initial_condition(const SkewSystem& sys, std::uint64_t seed,
                                            std::size_t id) {
  CounterRng rng(seed, id);
  const auto ia = sys.base().I_a();
  const double theta = rng.uniform(ia.lo, ia.hi);
  const double y = rng.uniform(-sys.y_bound(), sys.y_bound());
  return {theta, y};
}

LyapunovResult lyapunov_exponents(const SkewSystem& sys, std::size_t orbits, long n, long burn_in,
                                  std::uint64_t seed, int workers) {
  if (orbits == 0) fail("ConfigError", "ensemble must contain at least one orbit");
  if (n <= 0) fail("ConfigError", "orbit length must be positive");
  LyapunovResult res;
  res.seed = seed;
  res.orbits.resize(orbits);
  OrbitOptions opts;
  opts.burn_in = burn_in;
  opts.inverse_norm = true;

  parallel_for(orbits, workers, [&](std::size_t i) {
    const auto [t0, y0] = initial_condition(sys, seed, i);
    const auto acc = iterate(sys, t0, y0, n, opts);
    res.orbits[i] = {i, t0, y0, acc.lambda_theta(), acc.lambda_y(), acc.inv_norm_average(), n};
  });

  std::vector<double> lt, ly, li;
  for (const auto& o : res.orbits) {
    lt.push_back(o.lambda_theta);
    ly.push_back(o.lambda_y);
    li.push_back(o.inv_norm_average);
  }
  res.theta = sample_stats(lt);
  res.y = sample_stats(ly);
  res.inv_norm = sample_stats(li);
  return res;
}

// ---------------------------------------------------------------- constants

BEConstants compute_constants(double alpha, double sigma) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail("ConfigError", "alpha must lie in (0, 1)");
  if (!(sigma > 1.0 && sigma < 2.0)) fail("ConfigError", "sigma must lie in (1, 2)");
  BEConstants c;
  c.alpha = alpha;
  c.sigma = sigma;
  const double L = std::log(1.0 / alpha);
  c.n_alpha = static_cast<int>(std::ceil(L / std::log(4.0) - 1e-12));
  if (std::pow(sigma, c.n_alpha) > 1.0 / alpha) {
    std::ostringstream os;
    os << "sigma^N = " << std::pow(sigma, c.n_alpha) << " exceeds 1/alpha for N=" << c.n_alpha;
    fail("InconsistentConstants", os.str());
  }
  c.m_alpha = static_cast<int>(std::floor(L / std::log(32.0) + 1e-12));
  c.eta = std::log(sigma) / (8.0 * std::log(32.0));
  c.r0 = (0.5 - 2.0 * c.eta) * L;
  return c;
}

nlohmann::json to_json(const BEConstants& c) {
  return {{"alpha", c.alpha},   {"sigma", c.sigma},     {"delta_star", c.delta_star},
          {"C_star", c.c_star}, {"N_alpha", c.n_alpha}, {"M_alpha", c.m_alpha},
          {"eta", c.eta},       {"r0", c.r0},           {"beta", c.beta}};
}

SigmaFit estimate_sigma(const mt::MTCertificate& fiber, double radius, int trials,
                        int segment_length, std::uint64_t seed) {
  if (segment_length < 10) fail("InsufficientSegments", "segments shorter than 10 steps");
  if (trials < 1) fail("ConfigError", "sigma fit needs at least one trial");
  const double b = fiber.param.value();
  const QuadStepper step(b, mt::postcritical_set(fiber).points);
  const double bound = std::sqrt(2.0 * b);

  // Sums for the least-squares line through (k, log|(Q^k)'|).
  double sk = 0, sl = 0, skk = 0, skl = 0;
  long count = 0;
  std::vector<std::pair<int, double>> points;
  SigmaFit fit;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(t));
    QuadState s{rng.uniform(-bound, bound), -1, 0.0};
    for (int i = 0; i < 100; ++i) step.step(s);
    // Restart the segment whenever the orbit enters the excluded window.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      double logd = 0.0;
      bool ok = true;
      std::vector<double> logs;
      for (int k = 1; k <= segment_length; ++k) {
        if (std::abs(s.x) < radius || s.x == 0.0) {
          ok = false;
          step.step(s);
          break;
        }
        logd += std::log(2.0 * std::abs(s.x));
        logs.push_back(logd);
        step.step(s);
      }
      if (!ok) continue;
      for (int k = 1; k <= segment_length; ++k) {
        const double l = logs[k - 1];
        sk += k;
        sl += l;
        skk += double(k) * k;
        skl += k * l;
        points.emplace_back(k, l);
        ++count;
      }
      ++fit.segments;
      break;
    }
  }
  if (fit.segments < 2) fail("InsufficientSegments", "fewer than two admissible orbit segments");
  const double slope = (count * skl - sk * sl) / (count * skk - sk * sk);
  const double icpt = (sl - slope * sk) / count;
  double rss = 0.0;
  for (const auto& [k, l] : points) rss += (l - icpt - slope * k) * (l - icpt - slope * k);
  fit.raw_sigma = std::exp(slope);
  fit.log_c = icpt;
  fit.residual = std::sqrt(rss / count);
  constexpr double kEdge = 1e-9;
  fit.sigma = std::clamp(fit.raw_sigma, 1.0 + kEdge, 2.0 - kEdge);
  fit.clamped = fit.sigma != fit.raw_sigma;
  return fit;
}

double lower_triangular_norm(double p, double r, double q) noexcept {
  const double t = p * p + q * q + r * r;
  const double d = p * q;
  const double disc = std::max(0.0, t * t - 4.0 * d * d);
  return std::sqrt(0.5 * (t + std::sqrt(disc)));
}

}  // namespace mtlab::skew
