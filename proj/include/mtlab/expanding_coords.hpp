#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlab/mt_params.hpp"
#include "mtlab/quadrature.hpp"

namespace mtlab::coords {

/// rho(x) = prod_{v in PC} |x - v|^{-1/2}: inverse square-root singularity
/// at every post-critical point.
class MetricModel {
public:
  explicit MetricModel(mt::PostCriticalSet pc);

  const std::vector<double>& singularities() const noexcept { return pc_.points; }
  double operator()(double x) const;
  double log_density(double x) const;
  /// 1 / rho(x); zero at the singularities instead of throwing.
  double inverse(double x) const;
  /// rho with the factor at singularity `skip` removed.
  double reduced(double x, std::size_t skip) const;

private:
  mt::PostCriticalSet pc_;
};

MetricModel build_metric(const mt::PostCriticalSet& pc);

/// Open interval in the expanding coordinate theta.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const noexcept { return hi - lo; }
  double mid() const noexcept { return 0.5 * (lo + hi); }
  bool contains(double t) const noexcept { return t > lo && t < hi; }
};

/// Nested Markov partition of h0 at level n: components of
/// I_a minus h0^{-n}(u(PC_a)).
struct MarkovPartition {
  int level = 0;
  std::vector<double> breakpoints;  // theta, sorted, endpoints of I_a included
  std::vector<double> x_breakpoints;

  std::size_t size() const noexcept { return breakpoints.size() - 1; }
  Interval element(std::size_t i) const { return {breakpoints[i], breakpoints[i + 1]}; }
  /// Index of the element containing theta (ties go right).
  std::size_t locate(double theta) const;
};

/// Sign itinerary identifying a branch of h0^{-L}: word[j] is the sign of
/// x_j = Q_a^j(x) for the preimage x, j = 0..L-1.
using SignWord = std::vector<std::int8_t>;

enum class LambdaMode { OneStep, GeometricMean };

struct ExpandingOptions {
  int m1 = 0;  // 0: use m0
  int lambda_grid = 20000;
  int depth_cap = 40;
};

class ExpandingModel;

/// tau = (h0^L restricted to omega_L)^{-1} on a level-0 element.
class InverseBranch {
public:
  InverseBranch(const ExpandingModel& model, std::size_t target, SignWord word);

  std::size_t target() const noexcept { return target_; }
  std::size_t source() const noexcept { return source_; }
  const SignWord& word() const noexcept { return word_; }
  int base_steps() const noexcept { return static_cast<int>(word_.size()); }
  const Interval& domain() const noexcept;
  Interval image() const noexcept { return image_; }

  double operator()(double theta) const;
  double derivative(double theta) const;
  /// Pull back in the x coordinate: sigma(x) with Q_a^L(sigma(x)) = x.
  double pull_x(double x) const;
  /// Points x_L = x, x_{L-1}, ..., x_0 of the backward chain.
  void pull_chain(double x, std::vector<double>& chain) const;
  /// d sigma / dx along a chain produced by pull_chain.
  static double chain_slope(const std::vector<double>& chain);

private:
  const ExpandingModel* model_;
  std::size_t target_;
  std::size_t source_ = 0;
  SignWord word_;
  Interval image_;
};

struct DistortionReport {
  int level = 0;
  double c_d = 0.0;
  double worst_upper = 0.0;  // max |E|/|w_n| / |h0^n E|
  double worst_lower = 0.0;  // max |h0^n E|^2 / (|E|/|w_n|)
  std::vector<double> ratio;        // |E|/|w_n|
  std::vector<double> image_length; // |h0^n(E)|
};

class ExpandingModel {
public:
  ExpandingModel(const mt::MTCertificate& cert, ExpandingOptions opts = {});
  // Inverse branches keep a pointer back to the model.
  ExpandingModel(const ExpandingModel&) = delete;
  ExpandingModel& operator=(const ExpandingModel&) = delete;

  const mt::MTCertificate& certificate() const noexcept { return cert_; }
  double a() const noexcept { return a_; }
  const MetricModel& metric() const noexcept { return metric_; }
  const std::vector<double>& postcritical() const noexcept { return metric_.singularities(); }
  double x_lo() const noexcept { return x_lo_; }
  double x_hi() const noexcept { return x_hi_; }
  Interval I_a() const noexcept { return {theta_lo_, theta_hi_}; }

  int m1() const noexcept { return m1_; }
  int m0() const noexcept { return m0_; }
  double lambda_a() const noexcept { return lambda_a_; }
  LambdaMode lambda_mode() const noexcept { return lambda_mode_; }
  double tilde_lambda_a() const noexcept { return tilde_lambda_a_; }
  double lambda_g() const noexcept { return lambda_g_; }
  int depth_cap() const noexcept { return depth_cap_; }

  double u(double x) const;
  double x_of_theta(double theta) const;
  double h0(double theta) const;
  double h(double theta) const;

  /// log |h0'(u(x))| = log(rho(Q x) |Q'(x)| / rho(x)), evaluated without
  /// cancellation near post-critical points.
  double log_h0_slope_x(double x) const;
  /// rho(Q x)|Q'(x)| / rho(x) as a plain ratio.
  double h0_slope_x(double x) const;

  /// Level-0 partition (elements of Q_0 = P_0).
  const MarkovPartition& level0() const noexcept { return level0_; }
  /// Children of level-0 element `source` at P-level 1: inverse branches
  /// of h = h0^{m1}.
  const std::vector<InverseBranch>& p1_children(std::size_t source) const {
    return p1_children_.at(source);
  }
  std::size_t element_containing(double theta) const { return level0_.locate(theta); }

  nlohmann::json summary(const std::vector<int>& partition_levels = {}) const;

private:
  struct XLocation {
    double x;
    std::size_t anchor;  // singularity the offset is measured from
    double offset;       // x - singularity, exact up to rounding of s^2
  };

  double integrate_from_left(std::size_t piece, double s) const;
  double integrate_from_right(std::size_t piece, double s) const;
  double w_of_x(double x) const;
  double w_near(std::size_t anchor, double offset) const;
  XLocation x_of_w(double w) const;

  mt::MTCertificate cert_;
  double a_;
  MetricModel metric_;
  GaussLegendre gl_;
  double x_lo_, x_hi_;
  std::vector<double> piece_start_w_;  // W at each singularity
  std::vector<double> piece_mid_w_;    // W at each piece midpoint
  double w_zero_ = 0.0;
  double theta_lo_ = 0.0, theta_hi_ = 0.0;
  std::vector<std::pair<double, double>> preimage_pairs_;  // (v, w) with Q(w) = v

  int m1_ = 0, m0_ = 0, depth_cap_ = 40;
  double lambda_a_ = 0.0, tilde_lambda_a_ = 0.0, lambda_g_ = 0.0;
  LambdaMode lambda_mode_ = LambdaMode::OneStep;
  MarkovPartition level0_;
  std::vector<std::vector<InverseBranch>> p1_children_;

  friend class InverseBranch;
};

struct LambdaEstimate {
  double lambda = 0.0;
  LambdaMode mode = LambdaMode::OneStep;
  int steps = 1;
};

/// inf over a grid of the one-step metric expansion; falls back to the best
/// n-step geometric mean (n <= 8) when the one-step infimum is <= 1.
LambdaEstimate estimate_lambda_a(const mt::MTCertificate& cert, const MetricModel& metric,
                                 int grid_size);

int compute_m0(double lambda_a);

/// Level-n partition of h0 (Q-level, n base-map steps).
MarkovPartition markov_partition(const ExpandingModel& model, int level);

struct MarkovCheck {
  bool nested = true;
  bool markov = true;
  double worst_nesting = 0.0;
  double worst_markov = 0.0;
};

/// Verifies that `fine` (level n+1) refines `coarse` (level n) and that h0
/// maps each fine element onto a coarse element, both within `tol`.
MarkovCheck check_markov(const ExpandingModel& model, const MarkovPartition& coarse,
                         const MarkovPartition& fine, double tol = 1e-9);

/// Itinerary word of length L for a point theta (signs of Q^j(x)).
SignWord itinerary(const ExpandingModel& model, double theta, int length);

/// Inverse branch of h^n (n P-levels) realising omega_n onto omega_0; throws
/// NotABranch when h^n does not map omega_n onto omega_0.
InverseBranch inverse_branch(const ExpandingModel& model, std::size_t omega0, Interval omega_n,
                             int n);

DistortionReport distortion_report(const ExpandingModel& model, int level, int samples,
                                   std::uint64_t seed);

struct ExactnessResult {
  bool exact = false;
  int covering_time = -1;
};

}  // namespace mtlab::coords

namespace mtlab::mt {
/// Smallest M0 with h^{M0}(w) = I_a for every w in P_0, using the Markov
/// transition graph of Q_0 under h0.
coords::ExactnessResult check_topological_exactness(const coords::ExpandingModel& model,
                                                    int max_steps);
}  // namespace mtlab::mt
