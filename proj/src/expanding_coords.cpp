#include "mtlab/expanding_coords.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mtlab/error.hpp"
#include "mtlab/rng.hpp"

namespace mtlab::coords {

namespace {

constexpr int kQuadratureNodes = 64;
constexpr double kDomainSlack = 1e-12;

// For each post-critical v, a point w of the critical orbit (or 0) with
// Q(w) = v. Then Q(x) - v = (w - x)(w + x) without cancellation.
std::vector<std::pair<double, double>> preimage_pairs(const mt::MTCertificate& cert,
                                                      const std::vector<double>& pc) {
  const double a = cert.param.value();
  std::vector<std::pair<double, double>> pairs;
  for (double v : pc) {
    double prev = 0.0;
    double x = 0.0;
    for (int n = 1; n <= cert.preperiod + cert.period; ++n) {
      prev = x;
      x = mt::quadratic(a, x);
      if (std::abs(x - v) <= mt::kDedupTolerance) break;
    }
    pairs.emplace_back(v, prev);
  }
  return pairs;
}

double slope_ratio(double x, const std::vector<double>& pc,
                   const std::vector<std::pair<double, double>>& pairs) {
  double num = 1.0;
  double den = 1.0;
  for (double v : pc) num *= std::abs(x - v);
  for (const auto& [v, w] : pairs) den *= std::abs(w - x) * std::abs(w + x);
  return 2.0 * std::abs(x) * std::sqrt(num / den);
}

// sign * sqrt(a - v). Preimages of post-critical points are post-critical
// or 0; snapping them back keeps breakpoints from splitting into clusters
// a rounding error apart, which u would magnify to ~1e-8 in theta.
double pull_point(double a, const std::vector<double>& pc, double v, int sign) {
  const double r = sign * std::sqrt(std::max(0.0, a - v));
  if (std::find(pc.begin(), pc.end(), v) == pc.end()) return r;
  for (double w : pc)
    if (std::abs(r - w) < 1e-9) return w;
  return std::abs(r) < 1e-9 ? 0.0 : r;
}

}  // namespace

// ---------------------------------------------------------------- metric

MetricModel::MetricModel(mt::PostCriticalSet pc) : pc_(std::move(pc)) {
  if (pc_.points.empty()) fail("ConfigError", "post-critical set is empty");
  std::sort(pc_.points.begin(), pc_.points.end());
}

double MetricModel::operator()(double x) const {
  double prod = 1.0;
  for (double v : pc_.points) {
    if (x == v) {
      std::ostringstream os;
      os << "rho requested at post-critical point " << v;
      fail("EvaluationAtSingularity", os.str());
    }
    prod *= std::abs(x - v);
  }
  return 1.0 / std::sqrt(prod);
}

double MetricModel::inverse(double x) const {
  double prod = 1.0;
  for (double v : pc_.points) prod *= std::abs(x - v);
  return std::sqrt(prod);
}

double MetricModel::log_density(double x) const {
  double s = 0.0;
  for (double v : pc_.points) s += std::log(std::abs(x - v));
  return -0.5 * s;
}

double MetricModel::reduced(double x, std::size_t skip) const {
  double prod = 1.0;
  for (std::size_t i = 0; i < pc_.points.size(); ++i)
    if (i != skip) prod *= std::abs(x - pc_.points[i]);
  return 1.0 / std::sqrt(prod);
}

MetricModel build_metric(const mt::PostCriticalSet& pc) { return MetricModel(pc); }

// ---------------------------------------------------------------- lambda

LambdaEstimate estimate_lambda_a(const mt::MTCertificate& cert, const MetricModel& metric,
                                 int grid_size) {
  if (grid_size < 1000) fail("ConfigError", "lambda grid_size must be >= 1000");
  const auto& pc = metric.singularities();
  const auto pairs = preimage_pairs(cert, pc);
  const double a = cert.param.value();
  const double lo = pc.front();
  const double hi = pc.back();

  auto grid_point = [&](int i) { return lo + (i + 0.5) * (hi - lo) / grid_size; };
  auto near_pc = [&](double x) {
    return std::any_of(pc.begin(), pc.end(), [&](double v) { return std::abs(x - v) < 1e-12; });
  };

  double one_step = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_size; ++i) {
    const double x = grid_point(i);
    if (near_pc(x) || x == 0.0) continue;
    one_step = std::min(one_step, slope_ratio(x, pc, pairs));
  }
  if (one_step > 1.0) return {one_step, LambdaMode::OneStep, 1};

  LambdaEstimate best{0.0, LambdaMode::GeometricMean, 0};
  for (int n = 2; n <= 8; ++n) {
    double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_size; ++i) {
      double x = grid_point(i);
      double log_sum = 0.0;
      bool ok = true;
      for (int j = 0; j < n; ++j) {
        if (near_pc(x) || x == 0.0) {
          ok = false;
          break;
        }
        log_sum += std::log(slope_ratio(x, pc, pairs));
        x = mt::quadratic(a, x);
      }
      if (ok) inf = std::min(inf, std::exp(log_sum / n));
    }
    if (inf > best.lambda) best = {inf, LambdaMode::GeometricMean, n};
  }
  if (!(best.lambda > 1.0)) {
    std::ostringstream os;
    os << "metric expansion <= 1 for c=" << a << " (one-step " << one_step << ", best "
       << best.lambda << ")";
    fail("NotExpanding", os.str());
  }
  return best;
}

int compute_m0(double lambda_a) {
  int m = 1;
  while (!(std::pow(lambda_a, m) > 4.0)) ++m;
  return m;
}

// ---------------------------------------------------------------- model

ExpandingModel::ExpandingModel(const mt::MTCertificate& cert, ExpandingOptions opts)
    : cert_(cert),
      a_(cert.param.value()),
      metric_(mt::postcritical_set(cert)),
      gl_(kQuadratureNodes),
      depth_cap_(opts.depth_cap) {
  const auto& pc = metric_.singularities();
  if (pc.size() < 2) fail("ConfigError", "post-critical set must contain at least two points");
  x_lo_ = pc.front();
  x_hi_ = pc.back();
  preimage_pairs_ = preimage_pairs(cert_, pc);

  piece_start_w_.assign(pc.size(), 0.0);
  piece_mid_w_.assign(pc.size() - 1, 0.0);
  for (std::size_t j = 0; j + 1 < pc.size(); ++j) {
    const double s = std::sqrt(0.5 * (pc[j + 1] - pc[j]));
    piece_mid_w_[j] = piece_start_w_[j] + integrate_from_left(j, s);
    piece_start_w_[j + 1] = piece_mid_w_[j] + integrate_from_right(j, s);
  }
  w_zero_ = w_of_x(0.0);
  theta_lo_ = -w_zero_;
  theta_hi_ = piece_start_w_.back() - w_zero_;

  const LambdaEstimate est = estimate_lambda_a(cert_, metric_, opts.lambda_grid);
  lambda_a_ = est.lambda;
  lambda_mode_ = est.mode;
  m0_ = compute_m0(lambda_a_);
  tilde_lambda_a_ = 0.5 * (lambda_a_ + std::pow(4.0, 1.0 / m0_));
  if (opts.m1 != 0 && opts.m1 < m0_) {
    std::ostringstream os;
    os << "m1=" << opts.m1 << " below m0=" << m0_ << " (m1 may only be raised)";
    fail("ConfigError", os.str());
  }
  m1_ = opts.m1 == 0 ? m0_ : opts.m1;
  lambda_g_ = std::pow(lambda_a_, m1_);

  level0_.level = 0;
  level0_.x_breakpoints = pc;
  for (double v : pc) level0_.breakpoints.push_back(u(v));

  p1_children_.resize(level0_.size());
  if (m1_ > 20) fail("DepthExceeded", "m1 > 20 makes P_1 enumeration impractical");
  const std::size_t words = std::size_t{1} << m1_;
  for (std::size_t target = 0; target < level0_.size(); ++target) {
    for (std::size_t bits = 0; bits < words; ++bits) {
      SignWord word(static_cast<std::size_t>(m1_));
      for (int j = 0; j < m1_; ++j) word[j] = (bits >> j) & 1U ? -1 : 1;
      // A sign pattern is a branch only when every backward step stays in
      // the domain.
      const double xm = x_of_theta(level0_.element(target).mid());
      double x = xm;
      bool valid = true;
      for (int j = m1_ - 1; j >= 0; --j) {
        x = word[j] * std::sqrt(std::max(0.0, a_ - x));
        if (x < x_lo_ - kDomainSlack) {
          valid = false;
          break;
        }
      }
      if (!valid) continue;
      InverseBranch br(*this, target, std::move(word));
      p1_children_[br.source()].push_back(std::move(br));
    }
  }
  for (auto& kids : p1_children_)
    std::sort(kids.begin(), kids.end(),
              [](const InverseBranch& l, const InverseBranch& r) { return l.image().lo < r.image().lo; });
}

double ExpandingModel::integrate_from_left(std::size_t piece, double s) const {
  const double p = metric_.singularities()[piece];
  return gl_.integrate([&](double t) { return 2.0 * metric_.reduced(p + t * t, piece); }, 0.0, s);
}

double ExpandingModel::integrate_from_right(std::size_t piece, double s) const {
  const double q = metric_.singularities()[piece + 1];
  return gl_.integrate([&](double t) { return 2.0 * metric_.reduced(q - t * t, piece + 1); }, 0.0,
                       s);
}

double ExpandingModel::w_of_x(double x) const {
  const auto& pc = metric_.singularities();
  if (x < x_lo_ - kDomainSlack || x > x_hi_ + kDomainSlack || std::isnan(x)) {
    std::ostringstream os;
    os << "x=" << x << " outside [" << x_lo_ << ", " << x_hi_ << "]";
    fail("OutOfDomain", os.str());
  }
  x = std::clamp(x, x_lo_, x_hi_);
  std::size_t j = static_cast<std::size_t>(std::upper_bound(pc.begin(), pc.end(), x) - pc.begin());
  j = j == 0 ? 0 : j - 1;
  if (j + 1 >= pc.size()) return piece_start_w_.back();
  const double mid = 0.5 * (pc[j] + pc[j + 1]);
  if (x <= mid) return piece_start_w_[j] + integrate_from_left(j, std::sqrt(x - pc[j]));
  return piece_start_w_[j + 1] - integrate_from_right(j, std::sqrt(pc[j + 1] - x));
}

double ExpandingModel::w_near(std::size_t anchor, double offset) const {
  const auto& pc = metric_.singularities();
  if (offset >= 0.0) {
    if (anchor + 1 < pc.size() && offset <= 0.5 * (pc[anchor + 1] - pc[anchor]))
      return piece_start_w_[anchor] + integrate_from_left(anchor, std::sqrt(offset));
  } else if (anchor > 0 && -offset <= 0.5 * (pc[anchor] - pc[anchor - 1])) {
    return piece_start_w_[anchor] - integrate_from_right(anchor - 1, std::sqrt(-offset));
  }
  return w_of_x(pc[anchor] + offset);
}

ExpandingModel::XLocation ExpandingModel::x_of_w(double w) const {
  const auto& pc = metric_.singularities();
  const double w_hi = piece_start_w_.back();
  if (w < -kDomainSlack || w > w_hi + kDomainSlack || std::isnan(w)) {
    std::ostringstream os;
    os << "theta=" << w - w_zero_ << " outside I_a";
    fail("OutOfDomain", os.str());
  }
  w = std::clamp(w, 0.0, w_hi);
  std::size_t j = static_cast<std::size_t>(
      std::upper_bound(piece_start_w_.begin(), piece_start_w_.end(), w) - piece_start_w_.begin());
  j = j == 0 ? 0 : j - 1;
  if (j + 1 >= pc.size()) return {x_hi_, pc.size() - 1, 0.0};

  const bool from_left = w <= piece_mid_w_[j];
  const double target = from_left ? w - piece_start_w_[j] : piece_start_w_[j + 1] - w;
  const double s_max = std::sqrt(0.5 * (pc[j + 1] - pc[j]));
  const std::size_t anchor = from_left ? j : j + 1;
  auto integral = [&](double s) {
    return from_left ? integrate_from_left(j, s) : integrate_from_right(j, s);
  };
  auto integrand = [&](double s) {
    const double t = from_left ? pc[j] + s * s : pc[j + 1] - s * s;
    return 2.0 * metric_.reduced(t, anchor);
  };

  // Safeguarded Newton on s, the square-root distance to the anchor.
  double lo = 0.0;
  double hi = s_max;
  double s = std::clamp(target / integrand(0.0), lo, hi);
  for (int it = 0; it < 60; ++it) {
    const double g = integral(s) - target;
    if (g > 0.0)
      hi = s;
    else
      lo = s;
    double next = s - g / integrand(s);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - s);
    s = next;
    if (step <= 1e-16 * s_max || hi - lo <= 1e-16 * s_max) break;
  }
  const double offset = from_left ? s * s : -s * s;
  return {pc[anchor] + offset, anchor, offset};
}

double ExpandingModel::u(double x) const { return w_of_x(x) - w_zero_; }

double ExpandingModel::x_of_theta(double theta) const { return x_of_w(theta + w_zero_).x; }

double ExpandingModel::h0(double theta) const {
  const XLocation loc = x_of_w(theta + w_zero_);
  const auto& pc = metric_.singularities();
  const double x = loc.x;
  const double y = mt::quadratic(a_, x);
  auto nearest = [&](double t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pc.size(); ++i)
      if (std::abs(t - pc[i]) < std::abs(t - pc[best])) best = i;
    return best;
  };
  const std::size_t vi = nearest(y);
  if (std::abs(y - pc[vi]) < 1e-3) {
    // Near a post-critical image the square-root singularity of u would
    // amplify rounding; carry the offset to pc[vi] explicitly.
    const double p = pc[loc.anchor];
    const double qp = mt::quadratic(a_, p);
    if (std::abs(loc.offset) < 1e-3 && nearest(qp) == vi) {
      // Q maps PC into PC exactly, so only the offset term survives.
      const double e = -loc.offset * (2.0 * p + loc.offset);
      return w_near(vi, e) - w_zero_;
    }
    if (std::abs(x) < 0.05 && std::abs(a_ - pc[vi]) < 1e-12) return w_near(vi, -x * x) - w_zero_;
  }
  return u(y);
}

double ExpandingModel::h(double theta) const {
  for (int i = 0; i < m1_; ++i) theta = h0(theta);
  return theta;
}

double ExpandingModel::h0_slope_x(double x) const {
  const double s = slope_ratio(x, metric_.singularities(), preimage_pairs_);
  if (std::isfinite(s) && (s > 0.0 || x == 0.0)) return s;
  // Exactly on a post-critical point the ratio is 0/0; its limit is finite.
  const double dx = 1e-9 * (x > 0.0 ? -1.0 : 1.0);
  return slope_ratio(x + dx, metric_.singularities(), preimage_pairs_);
}

double ExpandingModel::log_h0_slope_x(double x) const { return std::log(h0_slope_x(x)); }

nlohmann::json ExpandingModel::summary(const std::vector<int>& partition_levels) const {
  nlohmann::json counts = nlohmann::json::array();
  for (int n : partition_levels) counts.push_back(markov_partition(*this, n).size());
  return {{"a", a_},
          {"m1", m1_},
          {"lambda_a", lambda_a_},
          {"lambda_mode", lambda_mode_ == LambdaMode::OneStep ? "one_step" : "geometric_mean"},
          {"m0", m0_},
          {"tilde_lambda_a", tilde_lambda_a_},
          {"lambda_g", lambda_g_},
          {"I_a", {theta_lo_, theta_hi_}},
          {"partition_counts", counts}};
}

// ---------------------------------------------------------------- branches

InverseBranch::InverseBranch(const ExpandingModel& model, std::size_t target, SignWord word)
    : model_(&model), target_(target), word_(std::move(word)) {
  const auto& pc = model.postcritical();
  auto pull_end = [&](double x) {
    for (auto it = word_.rbegin(); it != word_.rend(); ++it) x = pull_point(model.a(), pc, x, *it);
    return model.u(x);
  };
  const double lo = pull_end(model.level0().x_breakpoints[target]);
  const double hi = pull_end(model.level0().x_breakpoints[target + 1]);
  image_ = {std::min(lo, hi), std::max(lo, hi)};
  source_ = model.level0().locate(image_.mid());
}

const Interval& InverseBranch::domain() const noexcept {
  static thread_local Interval cache;
  cache = model_->level0().element(target_);
  return cache;
}

double InverseBranch::pull_x(double x) const {
  const double a = model_->a();
  for (auto it = word_.rbegin(); it != word_.rend(); ++it)
    x = *it * std::sqrt(std::max(0.0, a - x));
  return x;
}

void InverseBranch::pull_chain(double x, std::vector<double>& chain) const {
  const double a = model_->a();
  chain.resize(word_.size() + 1);
  chain[word_.size()] = x;
  for (std::size_t j = word_.size(); j-- > 0;) {
    x = word_[j] * std::sqrt(std::max(0.0, a - x));
    chain[j] = x;
  }
}

double InverseBranch::chain_slope(const std::vector<double>& chain) {
  double s = 1.0;
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) s *= -0.5 / chain[j];
  return s;
}

double InverseBranch::operator()(double theta) const {
  return model_->u(pull_x(model_->x_of_theta(theta)));
}

double InverseBranch::derivative(double theta) const {
  std::vector<double> chain;
  pull_chain(model_->x_of_theta(theta), chain);
  // tau' = prod over the chain of 1/h0'(y_j), with the orientation of
  // each quadratic branch.
  double d = 1.0;
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
    const double y = chain[j];
    d *= (y > 0.0 ? -1.0 : 1.0) / model_->h0_slope_x(y);
  }
  return d;
}

// ---------------------------------------------------------------- partitions

std::size_t MarkovPartition::locate(double theta) const {
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), theta);
  std::size_t i = static_cast<std::size_t>(it - breakpoints.begin());
  if (i == 0) return 0;
  return std::min(i - 1, size() - 1);
}

MarkovPartition markov_partition(const ExpandingModel& model, int level) {
  if (level < 0) fail("ConfigError", "partition level must be >= 0");
  if (level > model.depth_cap()) {
    std::ostringstream os;
    os << "partition level " << level << " exceeds depth cap " << model.depth_cap();
    fail("DepthExceeded", os.str());
  }
  const auto& pc = model.postcritical();
  const double a = model.a();
  std::vector<double> current = pc;
  std::vector<double> all = pc;
  for (int n = 0; n < level; ++n) {
    std::vector<double> next;
    next.reserve(2 * current.size());
    for (double v : current) {
      next.push_back(pull_point(a, pc, v, 1));
      const double r = pull_point(a, pc, v, -1);
      if (r >= model.x_lo() - kDomainSlack) next.push_back(r);
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    all.insert(all.end(), next.begin(), next.end());
    current = std::move(next);
  }
  std::sort(all.begin(), all.end());

  MarkovPartition part;
  part.level = level;
  for (double x : all) {
    x = std::clamp(x, model.x_lo(), model.x_hi());
    const double t = model.u(x);
    if (!part.breakpoints.empty() && t - part.breakpoints.back() <= 1e-12) continue;
    part.breakpoints.push_back(t);
    part.x_breakpoints.push_back(x);
  }
  return part;
}

MarkovCheck check_markov(const ExpandingModel& model, const MarkovPartition& coarse,
                         const MarkovPartition& fine, double tol) {
  MarkovCheck res;
  auto nearest = [](const std::vector<double>& pts, double t) {
    auto it = std::lower_bound(pts.begin(), pts.end(), t);
    std::size_t best = it == pts.end() ? pts.size() - 1 : static_cast<std::size_t>(it - pts.begin());
    if (best > 0 && std::abs(pts[best - 1] - t) < std::abs(pts[best] - t)) --best;
    return std::pair{best, std::abs(pts[best] - t)};
  };
  for (double t : coarse.breakpoints) {
    const double d = nearest(fine.breakpoints, t).second;
    res.worst_nesting = std::max(res.worst_nesting, d);
  }
  res.nested = res.worst_nesting <= tol;

  std::vector<std::pair<std::size_t, double>> images;
  images.reserve(fine.breakpoints.size());
  for (double t : fine.breakpoints) images.push_back(nearest(coarse.breakpoints, model.h0(t)));
  for (std::size_t i = 0; i + 1 < images.size(); ++i) {
    const auto [j1, d1] = images[i];
    const auto [j2, d2] = images[i + 1];
    res.worst_markov = std::max({res.worst_markov, d1, d2});
    const std::size_t gap = j1 > j2 ? j1 - j2 : j2 - j1;
    if (gap != 1) res.markov = false;
  }
  if (res.worst_markov > tol) res.markov = false;
  return res;
}

SignWord itinerary(const ExpandingModel& model, double theta, int length) {
  SignWord word(static_cast<std::size_t>(length));
  double x = model.x_of_theta(theta);
  for (int j = 0; j < length; ++j) {
    word[j] = x < 0.0 ? -1 : 1;
    x = mt::quadratic(model.a(), x);
  }
  return word;
}

InverseBranch inverse_branch(const ExpandingModel& model, std::size_t omega0, Interval omega_n,
                             int n) {
  if (omega0 >= model.level0().size()) fail("NotABranch", "omega_0 index out of range");
  const int steps = n * model.m1();
  InverseBranch br(model, omega0, itinerary(model, omega_n.mid(), steps));
  const double tol = 1e-9;
  if (std::abs(br.image().lo - omega_n.lo) > tol || std::abs(br.image().hi - omega_n.hi) > tol) {
    std::ostringstream os;
    os << "h^" << n << " does not map (" << omega_n.lo << ", " << omega_n.hi
       << ") onto level-0 element " << omega0;
    fail("NotABranch", os.str());
  }
  return br;
}

DistortionReport distortion_report(const ExpandingModel& model, int level, int samples,
                                   std::uint64_t seed) {
  const MarkovPartition part = markov_partition(model, level);
  DistortionReport rep;
  rep.level = level;
  CounterRng rng(seed, static_cast<std::uint64_t>(level));
  auto forward = [&](double t) {
    for (int i = 0; i < level; ++i) t = model.h0(t);
    return t;
  };
  for (int s = 0; s < samples; ++s) {
    const auto idx = std::min(part.size() - 1, static_cast<std::size_t>(rng.uniform() * part.size()));
    const Interval w = part.element(idx);
    double e0;
    double e1;
    if (s % 16 == 0) {
      e0 = w.lo;
      e1 = w.hi;
    } else {
      e0 = w.lo + rng.uniform() * w.length();
      e1 = w.lo + rng.uniform() * w.length();
      if (e0 > e1) std::swap(e0, e1);
      if (e1 - e0 < 1e-9 * w.length()) e1 = std::min(w.hi, e0 + 1e-9 * w.length());
    }
    const double ratio = (e1 - e0) / w.length();
    const double image = std::abs(forward(e1) - forward(e0));
    rep.ratio.push_back(ratio);
    rep.image_length.push_back(image);
    rep.worst_upper = std::max(rep.worst_upper, ratio / image);
    rep.worst_lower = std::max(rep.worst_lower, image * image / ratio);
  }
  rep.c_d = std::max({rep.worst_upper, rep.worst_lower, 1.0});
  return rep;
}

}  // namespace mtlab::coords

namespace mtlab::mt {

coords::ExactnessResult check_topological_exactness(const coords::ExpandingModel& model,
                                                    int max_steps) {
  const auto& q0 = model.level0();
  const std::size_t k = q0.size();
  // step[i][j]: h0(element i) contains element j, read off the Q_1 branches.
  std::vector<std::vector<char>> step(k, std::vector<char>(k, 0));
  for (std::size_t target = 0; target < k; ++target) {
    for (int s : {1, -1}) {
      const double xm = model.x_of_theta(q0.element(target).mid());
      const double x = s * std::sqrt(std::max(0.0, model.a() - xm));
      if (x < model.x_lo() - 1e-12) continue;
      step[q0.locate(model.u(x))][target] = 1;
    }
  }
  auto compose = [k](const std::vector<std::vector<char>>& l, const std::vector<std::vector<char>>& r) {
    std::vector<std::vector<char>> out(k, std::vector<char>(k, 0));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t m = 0; m < k; ++m)
        if (l[i][m])
          for (std::size_t j = 0; j < k; ++j) out[i][j] |= r[m][j];
    return out;
  };
  std::vector<std::vector<char>> hmap(k, std::vector<char>(k, 0));
  for (std::size_t i = 0; i < k; ++i) hmap[i][i] = 1;
  for (int i = 0; i < model.m1(); ++i) hmap = compose(hmap, step);

  std::vector<std::vector<char>> reach(k, std::vector<char>(k, 0));
  for (std::size_t i = 0; i < k; ++i) reach[i][i] = 1;
  for (int m = 0; m <= max_steps; ++m) {
    const bool full = std::all_of(reach.begin(), reach.end(), [](const auto& row) {
      return std::all_of(row.begin(), row.end(), [](char c) { return c != 0; });
    });
    if (full) return {true, m};
    reach = compose(reach, hmap);
  }
  return {false, -1};
}

}  // namespace mtlab::mt
