#include "mtlab/curves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mtlab/error.hpp"
#include "mtlab/rng.hpp"

namespace mtlab::curves {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kCheckPoints = 8;

double to_unit(const Interval& d, double t) { return (2.0 * t - d.lo - d.hi) / d.length(); }

double clenshaw(const std::vector<double>& c, double s) {
  double b1 = 0.0;
  double b2 = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) {
    const double b0 = 2.0 * s * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return s * b1 - b2 + (c.empty() ? 0.0 : c[0]);
}

}  // namespace

// ---------------------------------------------------------------- Chebyshev

std::vector<double> ChebCurve::nodes(Interval dom, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    // increasing order
    const double s = -std::cos((2.0 * j + 1.0) * kPi / (2.0 * n));
    t[j] = dom.mid() + 0.5 * dom.length() * s;
  }
  return t;
}

ChebCurve::ChebCurve(Interval dom, std::vector<double> values)
    : dom_(dom), values_(std::move(values)) {
  const int n = size();
  if (n < 2) fail("ConfigError", "Chebyshev curve needs at least two nodes");
  nodes_ = nodes(dom_, n);
  weights_.resize(n);
  for (int j = 0; j < n; ++j)
    weights_[j] = (j % 2 ? -1.0 : 1.0) * std::sin((2.0 * j + 1.0) * kPi / (2.0 * n));
  // Nodes run from -1 to 1, i.e. index j is the (n-1-j)-th classical node.
  coeffs_.assign(n, 0.0);
  double vmax = 0.0;
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double angle = k * (2.0 * (n - 1 - j) + 1.0) * kPi / (2.0 * n);
      s += values_[j] * std::cos(angle);
    }
    coeffs_[k] = (k == 0 ? 1.0 : 2.0) * s / n;
  }
  for (double v : values_) vmax = std::max(vmax, std::abs(v));
  // Drop the tail that sits at the rounding floor.
  const double floor = 4.0 * n * std::numeric_limits<double>::epsilon() * std::max(vmax, 1e-300);
  std::size_t keep = coeffs_.size();
  while (keep > 1 && std::abs(coeffs_[keep - 1]) <= floor) --keep;
  coeffs_.resize(keep);
}

ChebCurve ChebCurve::fit(Interval dom, const std::function<double(double)>& f, int degree,
                         int max_degree, double tol) {
  if (!(dom.length() > 0.0)) fail("ConfigError", "empty curve domain");
  std::vector<double> checks(kCheckPoints);
  std::vector<double> check_values(kCheckPoints);
  for (int i = 0; i < kCheckPoints; ++i) {
    // irrational offsets keep the probes off every node set
    const double s = std::fmod((i + 1) * 0.6180339887498949, 1.0);
    checks[i] = dom.lo + dom.length() * (0.02 + 0.96 * s);
    check_values[i] = f(checks[i]);
  }
  for (int n = degree;; n *= 2) {
    const auto t = nodes(dom, n);
    std::vector<double> v(t.size());
    double vmax = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      v[j] = f(t[j]);
      vmax = std::max(vmax, std::abs(v[j]));
    }
    ChebCurve c(dom, std::move(v));
    double res = 0.0;
    for (int i = 0; i < kCheckPoints; ++i) res = std::max(res, std::abs(c(checks[i]) - check_values[i]));
    c.residual_ = res / std::max(1.0, vmax);
    if (c.residual_ <= tol || 2 * n > max_degree) return c;
  }
}

double ChebCurve::operator()(double t) const {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    const double d = t - nodes_[j];
    if (d == 0.0) return values_[j];
    const double w = weights_[j] / d;
    num += w * values_[j];
    den += w;
  }
  return num / den;
}

const std::vector<double>& ChebCurve::derivative_coeffs(int order) const {
  while (static_cast<int>(dcoeffs_.size()) < order) {
    const auto& c = dcoeffs_.empty() ? coeffs_ : dcoeffs_.back();
    const std::size_t n = c.size();
    std::vector<double> d(n > 1 ? n - 1 : 1, 0.0);
    if (n > 1) {
      // c'_{k-1} = c'_{k+1} + 2k c_k
      std::vector<double> e(n + 1, 0.0);
      for (std::size_t k = n - 1; k >= 1; --k) e[k - 1] = e[k + 1] + 2.0 * k * c[k];
      e[0] *= 0.5;
      const double scale = 2.0 / dom_.length();
      for (std::size_t k = 0; k + 1 < n; ++k) d[k] = e[k] * scale;
    }
    dcoeffs_.push_back(std::move(d));
  }
  return dcoeffs_[order - 1];
}

double ChebCurve::derivative(double t, int order) const {
  if (order == 0) return (*this)(t);
  return clenshaw(derivative_coeffs(order), to_unit(dom_, t));
}

// ---------------------------------------------------------------- pushes

AdmissibleCurve horizontal(const skew::SkewSystem& sys, std::size_t element, double y0) {
  if (!(std::abs(y0) <= sys.y_bound())) fail("OutOfDomain", "y0 outside the fiber interval");
  const Interval dom = sys.base().level0().element(element);
  return {ChebCurve(dom, std::vector<double>(2, y0)), element, y0, {}};
}

AdmissibleCurve push_curve(const skew::SkewSystem& sys, const AdmissibleCurve& X,
                           const InverseBranch& branch) {
  if (branch.source() != X.element) {
    std::ostringstream os;
    os << "branch image lies in element " << branch.source() << ", curve lives on " << X.element;
    fail("NotSubElement", os.str());
  }
  const auto& model = sys.base();
  const double alpha = sys.alpha();
  auto f = [&](double theta) {
    const double xs = branch.pull_x(model.x_of_theta(theta));
    const double inner = X.X(model.u(xs));
    return alpha * sys.phi_x(xs) + sys.fiber_map(inner);
  };
  AdmissibleCurve out{ChebCurve::fit(model.level0().element(branch.target()), f), branch.target(),
                      X.y0, X.chain};
  out.chain.push_back(branch);
  return out;
}

std::vector<AdmissibleCurve> push_all(const skew::SkewSystem& sys, const AdmissibleCurve& X) {
  std::vector<AdmissibleCurve> out;
  for (const auto& br : sys.base().p1_children(X.element)) out.push_back(push_curve(sys, X, br));
  return out;
}

std::vector<AdmissibleCurve> evolve_chain(const skew::SkewSystem& sys, double y0,
                                          const std::vector<InverseBranch>& chain) {
  if (chain.empty()) fail("ConfigError", "empty branch chain");
  if (static_cast<int>(chain.size()) * sys.base().m1() > 64 * sys.base().depth_cap())
    fail("DepthExceeded", "branch chain too deep");
  std::vector<AdmissibleCurve> out;
  out.push_back(horizontal(sys, chain.front().source(), y0));
  for (const auto& br : chain) out.push_back(push_curve(sys, out.back(), br));
  return out;
}

AdmissibleCurve evolve_horizontal(const skew::SkewSystem& sys, double y0,
                                  const std::vector<InverseBranch>& chain) {
  return evolve_chain(sys, y0, chain).back();
}

std::vector<AdmissibleCurve> evolve_all(const skew::SkewSystem& sys, std::size_t element,
                                        double y0, int n, std::size_t cap) {
  std::vector<AdmissibleCurve> level{horizontal(sys, element, y0)};
  for (int k = 0; k < n; ++k) {
    std::vector<AdmissibleCurve> next;
    for (const auto& c : level) {
      if (next.size() + sys.base().p1_children(c.element).size() > cap) {
        std::ostringstream os;
        os << "more than " << cap << " curves at depth " << k + 1;
        fail("DepthExceeded", os.str());
      }
      for (auto& child : push_all(sys, c)) next.push_back(std::move(child));
    }
    level = std::move(next);
  }
  return level;
}

std::vector<InverseBranch> random_chain(const coords::ExpandingModel& model, std::size_t element,
                                        int n, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  std::vector<InverseBranch> chain;
  for (int k = 0; k < n; ++k) {
    const auto& kids = model.p1_children(element);
    if (kids.empty()) fail("NotABranch", "element has no P1 children");
    const auto pick = std::min(kids.size() - 1, static_cast<std::size_t>(rng.uniform() * kids.size()));
    chain.push_back(kids[pick]);
    element = kids[pick].target();
  }
  return chain;
}

std::vector<AdmissibleCurve> random_curve_set(const skew::SkewSystem& sys, std::size_t count,
                                              int depth_min, int depth_max, std::uint64_t seed) {
  if (depth_min < 1 || depth_max < depth_min) fail("ConfigError", "need 1 <= depth_min <= depth_max");
  const auto& model = sys.base();
  std::vector<AdmissibleCurve> out;
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng(seed, 0xc0e5ULL + i);
    const int span = depth_max - depth_min + 1;
    const int depth = depth_min + std::min(span - 1, static_cast<int>(rng.uniform() * span));
    const auto n0 = model.level0().size();
    const auto element = std::min(n0 - 1, static_cast<std::size_t>(rng.uniform() * n0));
    const double y0 = rng.uniform(-sys.y_bound(), sys.y_bound());
    out.push_back(evolve_horizontal(sys, y0, random_chain(model, element, depth, seed, i)));
  }
  return out;
}

double direct_value(const skew::SkewSystem& sys, double y0, const std::vector<InverseBranch>& chain,
                    double theta) {
  std::vector<double> z(chain.size() + 1);
  z.back() = sys.base().x_of_theta(theta);
  for (std::size_t j = chain.size(); j-- > 0;) z[j] = chain[j].pull_x(z[j + 1]);
  double y = y0;
  for (std::size_t j = 0; j < chain.size(); ++j) y = sys.fiber_map(y) + sys.alpha() * sys.phi_x(z[j]);
  return y;
}

// ---------------------------------------------------------------- family T

std::vector<double> TFamilyElement::terms(const skew::SkewSystem& sys, double theta) const {
  const auto& model = sys.base();
  double x = model.x_of_theta(theta);
  // d(phi o tau_k)/d theta = phi_poly'(sigma_k x) sigma_k'(x) / (rho(x) scale)
  const double outer = model.metric().inverse(x) / sys.phi_scale();
  double dsigma = 1.0;
  std::vector<double> out;
  std::vector<double> pts;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto& br = chain[chain.size() - 1 - k];
    br.pull_chain(x, pts);
    dsigma *= InverseBranch::chain_slope(pts);
    x = pts.front();
    out.push_back(sys.phi_poly().derivative(x) * dsigma * outer);
  }
  return out;
}

double TFamilyElement::operator()(const skew::SkewSystem& sys, double theta) const {
  const auto t = terms(sys, theta);
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += c[k] * t[k];
  return s;
}

std::vector<double> TFamilyElement::terms_fd(const skew::SkewSystem& sys, double theta) const {
  const auto& model = sys.base();
  std::vector<double> out;
  std::vector<std::int8_t> word;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto& br = chain[chain.size() - 1 - k];
    word.insert(word.begin(), br.word().begin(), br.word().end());
    const InverseBranch tau(model, chain.back().target(), word);
    auto d = [&](double h) { return (tau(theta + h) - tau(theta - h)) / (2.0 * h); };
    const double h = 1e-6;
    const double slope = (4.0 * d(0.5 * h) - d(h)) / 3.0;
    out.push_back(sys.dphi(tau(theta)) * slope);
  }
  return out;
}

double truncation_bound(double lambda_g, int depth, double phi_prime_sup) {
  if (!(lambda_g > 4.0)) return std::numeric_limits<double>::infinity();
  const double q = 4.0 / lambda_g;
  return phi_prime_sup * 0.25 * std::pow(q, depth + 1) / (1.0 - q);
}

double phi_prime_sup(const skew::SkewSystem& sys, int grid) {
  const auto ia = sys.base().I_a();
  double s = 0.0;
  for (int i = 0; i < grid; ++i) s = std::max(s, std::abs(sys.dphi(ia.lo + ia.length() * (i + 0.5) / grid)));
  return s;
}

TFamilyElement matched_t(const skew::SkewSystem& /*sys*/, const std::vector<AdmissibleCurve>& chain) {
  if (chain.size() < 2) fail("MissingProvenance", "curve chain must include a pushed curve");
  const auto& last = chain.back();
  TFamilyElement t{last.element, last.chain, {1.0}};
  const int n = last.depth();
  // D_j = Q_b'(X_{j-1}(beta_j theta0_j)), theta0_j the midpoint of dom X_j.
  std::vector<double> D(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    const auto& br = last.chain[j - 1];
    const double theta0 = chain[j].X.domain().mid();
    D[j] = -2.0 * chain[j - 1].X(br(theta0));
    if (std::abs(D[j]) > 4.0) fail("ConfigError", "|D| > 4 in the T recursion");
  }
  for (int k = 2; k <= n; ++k) t.c.push_back(t.c.back() * D[n - k + 2]);
  return t;
}

std::vector<double> check_linear_approx(const skew::SkewSystem& sys,
                                        const std::vector<AdmissibleCurve>& chain, int l) {
  const TFamilyElement t = matched_t(sys, chain);
  const auto& X = chain.back().X;
  const ChebCurve T = ChebCurve::fit(X.domain(), [&](double th) { return t(sys, th); });
  std::vector<double> sup(static_cast<std::size_t>(l) + 1, 0.0);
  for (double th : X.node_points())
    for (int i = 0; i <= l; ++i)
      sup[i] = std::max(sup[i], std::abs(X.derivative(th, i + 1) - sys.alpha() * T.derivative(th, i)));
  return sup;
}

// ---------------------------------------------------------------- non-flatness

namespace {

// min over curves and grid of sum_{i<=l} |X^(i)| / alpha for l = 1..l_max+1,
// and the matching sups.
void derivative_sums(const std::vector<AdmissibleCurve>& curves, double alpha, int l_max, int grid,
                     std::vector<double>& inf_sum, std::vector<double>& sup_sum,
                     std::vector<std::vector<double>>* per_curve_inf,
                     std::vector<std::vector<double>>* per_curve_sup) {
  const int L = l_max + 1;
  inf_sum.assign(L, std::numeric_limits<double>::infinity());
  sup_sum.assign(L, 0.0);
  for (const auto& c : curves) {
    std::vector<double> cinf(L, std::numeric_limits<double>::infinity());
    std::vector<double> csup(L, 0.0);
    const auto& dom = c.X.domain();
    for (int g = 0; g < grid; ++g) {
      const double th = dom.lo + dom.length() * (g + 0.5) / grid;
      double s = 0.0;
      for (int i = 1; i <= L; ++i) {
        s += std::abs(c.X.derivative(th, i)) / alpha;
        cinf[i - 1] = std::min(cinf[i - 1], s);
        csup[i - 1] = std::max(csup[i - 1], s);
      }
    }
    for (int i = 0; i < L; ++i) {
      inf_sum[i] = std::min(inf_sum[i], cinf[i]);
      sup_sum[i] = std::max(sup_sum[i], csup[i]);
    }
    if (per_curve_inf) per_curve_inf->push_back(cinf);
    if (per_curve_sup) per_curve_sup->push_back(csup);
  }
}

}  // namespace

NonFlatReport check_nonflat(const std::vector<AdmissibleCurve>& curves, double alpha, int l_max,
                            int grid) {
  if (curves.empty()) fail("ConfigError", "no curves given");
  if (!(alpha > 0.0)) fail("ConfigError", "non-flatness needs alpha > 0");
  for (const auto& c : curves)
    if (c.depth() < 1) fail("NotAdmissible", "depth-0 (horizontal) curves are not admissible");
  std::vector<double> inf1, sup1, inf2, sup2;
  std::vector<std::vector<double>> pinf, psup;
  derivative_sums(curves, alpha, l_max, grid, inf1, sup1, nullptr, nullptr);
  derivative_sums(curves, alpha, l_max, 2 * grid, inf2, sup2, &pinf, &psup);
  NonFlatReport r;
  r.b_per_level.assign(inf2.begin(), inf2.begin() + l_max);
  for (int l = 1; l <= l_max; ++l) {
    const double b1 = inf1[l - 1];
    const double b2 = inf2[l - 1];
    if (b1 >= 1e-3 && std::abs(b2 - b1) <= 0.2 * b1) {
      r.l0 = l;
      r.b_hat = b2;
      r.a_hat = sup2[l];
      for (std::size_t k = 0; k < curves.size(); ++k) {
        r.per_curve_b.push_back(pinf[k][l - 1]);
        r.per_curve_a.push_back(psup[k][l]);
      }
      return r;
    }
  }
  std::ostringstream os;
  os << "no l0 <= " << l_max << " gives a stable lower bound; B^(l_max) = " << inf2[l_max - 1];
  fail("NoFiniteL0", os.str());
}

nlohmann::json to_json(const NonFlatReport& r) {
  return {{"l0", r.l0},
          {"B_hat", r.b_hat},
          {"A_hat", r.a_hat},
          {"B_per_level", r.b_per_level},
          {"per_curve_B", r.per_curve_b},
          {"per_curve_A", r.per_curve_a}};
}

std::vector<double> curve_recurrence(const AdmissibleCurve& X, double alpha,
                                     const std::vector<double>& eps, double i_a_length) {
  const auto& dom = X.X.domain();
  constexpr int kCells = 4096;
  const double resolution = 1e-6 * dom.length();
  std::vector<double> out;
  for (double e : eps) {
    const double level = alpha * e;
    auto inside = [&](double t) { return std::abs(X.X(t)) <= level; };
    // boundary of the set inside [t0, t1], located by bisection
    auto crossing = [&](double t0, double t1) {
      const bool in0 = inside(t0);
      while (t1 - t0 > resolution) {
        const double m = 0.5 * (t0 + t1);
        (inside(m) == in0 ? t0 : t1) = m;
      }
      return 0.5 * (t0 + t1);
    };
    double measure = 0.0;
    const double h = dom.length() / kCells;
    bool prev = inside(dom.lo);
    for (int i = 0; i < kCells; ++i) {
      const double t0 = dom.lo + i * h;
      const double t1 = t0 + h;
      const bool cur = inside(t1);
      if (prev && cur)
        measure += h;
      else if (prev != cur) {
        const double c = crossing(t0, t1);
        measure += prev ? c - t0 : t1 - c;
      }
      prev = cur;
    }
    out.push_back(measure / i_a_length);
  }
  return out;
}

// ---------------------------------------------------------------- separation

std::pair<InverseBranch, InverseBranch> central_siblings(const coords::ExpandingModel& model,
                                                         std::size_t element) {
  const InverseBranch* plus = nullptr;
  const InverseBranch* minus = nullptr;
  for (const auto& br : model.p1_children(element)) {
    if (std::abs(br.image().lo) < 1e-9) plus = &br;
    if (std::abs(br.image().hi) < 1e-9) minus = &br;
  }
  if (!plus || !minus) fail("NotABranch", "no P1 elements adjacent to theta = 0 in this element");
  return {*plus, *minus};
}

namespace {

// Branch with the first sign flipped (preimage -x instead of x), if valid.
bool mirror(const coords::ExpandingModel& model, const InverseBranch& br, InverseBranch& out) {
  const double x = br.pull_x(model.x_of_theta(model.level0().element(br.target()).mid()));
  if (-x < model.x_lo() - 1e-12) return false;
  auto word = br.word();
  word[0] = static_cast<std::int8_t>(-word[0]);
  out = InverseBranch(model, br.target(), std::move(word));
  return true;
}

// Sign word of the branches pushed after the first `skip`.
std::vector<std::int8_t> flatten(const std::vector<InverseBranch>& chain, std::size_t skip) {
  std::vector<std::int8_t> w;
  for (std::size_t i = skip; i < chain.size(); ++i)
    w.insert(w.end(), chain[i].word().begin(), chain[i].word().end());
  return w;
}

// Tails of length len starting at `element`, at most cap of them.
void tails(const coords::ExpandingModel& model, std::size_t element, int len, std::size_t cap,
           std::vector<InverseBranch>& cur, std::vector<std::vector<InverseBranch>>& out) {
  if (out.size() >= cap) return;
  if (len == 0) {
    out.push_back(cur);
    return;
  }
  for (const auto& br : model.p1_children(element)) {
    cur.push_back(br);
    tails(model, br.target(), len - 1, cap, cur, out);
    cur.pop_back();
    if (out.size() >= cap) return;
  }
}

}  // namespace

SeparationResult separation_test(const skew::SkewSystem& sys, const AdmissibleCurve& X, int m_search,
                                 const SeparationOptions& opts) {
  if (m_search < 1) fail("ConfigError", "M_search must be >= 1");
  const auto& model = sys.base();
  const double alpha = sys.alpha();
  if (!(alpha > 0.0)) fail("ConfigError", "separation needs alpha > 0");

  std::vector<std::pair<InverseBranch, InverseBranch>> firsts;
  if (opts.central_only) {
    firsts.push_back(central_siblings(model, X.element));
  } else {
    for (const auto& br : model.p1_children(X.element)) {
      if (br.word()[0] < 0) continue;
      InverseBranch m = br;
      if (!mirror(model, br, m) || m.source() != X.element) continue;
      firsts.emplace_back(br, m);
    }
  }

  SeparationResult res;
  bool found = false;
  for (int M = 1; M <= m_search; ++M) {
    double best = 0.0;
    std::vector<std::int8_t> wp, wm;
    std::size_t pairs = 0;
    for (const auto& [bp, bm] : firsts) {
      const AdmissibleCurve zp1 = push_curve(sys, X, bp);
      const AdmissibleCurve zm1 = push_curve(sys, X, bm);
      std::vector<std::vector<InverseBranch>> ts;
      std::vector<InverseBranch> cur;
      tails(model, bp.target(), M - 1, opts.pair_cap, cur, ts);
      for (const auto& tail : ts) {
        if (pairs++ >= opts.pair_cap) break;
        AdmissibleCurve zp = zp1;
        AdmissibleCurve zm = zm1;
        for (const auto& br : tail) {
          zp = push_curve(sys, zp, br);
          zm = push_curve(sys, zm, br);
        }
        double sup = 0.0;
        for (double th : zp.X.node_points()) sup = std::max(sup, std::abs(zp.X(th) - zm.X(th)));
        if (sup / alpha > best) {
          best = sup / alpha;
          wp = flatten(zp.chain, X.chain.size());
          wm = flatten(zm.chain, X.chain.size());
        }
      }
    }
    res.best_per_level.push_back(best);
    if (!found && best >= opts.threshold) {
      found = true;
      res.m_star = M;
      res.eps0 = best;
      res.witness_plus = wp;
      res.witness_minus = wm;
    }
  }
  if (!found) {
    std::ostringstream os;
    os << "sibling curves never separate by " << opts.threshold << " alpha up to M=" << m_search
       << " (best " << *std::max_element(res.best_per_level.begin(), res.best_per_level.end())
       << " alpha)";
    fail("NoSeparation", os.str());
  }
  return res;
}

}  // namespace mtlab::curves
