#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlab/expanding_coords.hpp"
#include "mtlab/mt_params.hpp"

namespace mtlab::skew {

/// Polynomial in x, coefficients in increasing degree.
class Polynomial {
public:
  explicit Polynomial(std::vector<double> coeffs);

  double operator()(double x) const noexcept;
  double derivative(double x, int order = 1) const noexcept;
  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
  bool constant() const noexcept { return degree() < 1; }
  const std::vector<double>& coeffs() const noexcept { return coeffs_; }

private:
  std::vector<double> coeffs_;
};

/// State of a quadratic orbit. After a close passage of the critical point
/// the point is kept as (post-critical anchor, offset) until the offset is
/// large again; plain doubles would land exactly on the post-critical
/// cycle and stay there.
struct QuadState {
  double x = 0.0;
  int anchor = -1;
  double offset = 0.0;
};

class QuadStepper {
public:
  QuadStepper(double c, std::vector<double> postcritical);

  void step(QuadState& s) const noexcept;
  double c() const noexcept { return c_; }

private:
  double c_;
  std::vector<double> pc_;
  std::vector<int> next_;  // index of Q(pc_[i]) in pc_
};

class SkewSystem {
public:
  SkewSystem(std::shared_ptr<const coords::ExpandingModel> base, const mt::MTCertificate& fiber,
             double alpha, Polynomial phi);

  const coords::ExpandingModel& base() const noexcept { return *base_; }
  std::shared_ptr<const coords::ExpandingModel> base_ptr() const noexcept { return base_; }
  const mt::MTCertificate& fiber_certificate() const noexcept { return fiber_; }
  double b() const noexcept { return b_; }
  double alpha() const noexcept { return alpha_; }
  const Polynomial& phi_poly() const noexcept { return phi_; }
  double phi_scale() const noexcept { return scale_; }
  bool odd_degree() const noexcept { return phi_.degree() % 2 == 1; }
  /// Half-width sqrt(2b) of the fiber interval.
  double y_bound() const noexcept { return y_bound_; }
  coords::Interval fiber_interval() const noexcept { return {-y_bound_, y_bound_}; }
  double alpha_max() const noexcept { return alpha_max_; }

  /// Normalized coupling as a function of the base point in x.
  double phi_x(double x) const noexcept { return phi_(x) / scale_; }
  double phi(double theta) const { return phi_x(base_->x_of_theta(theta)); }
  /// d phi / d theta = phi_poly'(x) / (scale * rho(x)).
  double dphi(double theta) const;

  double fiber_map(double y) const noexcept { return b_ - y * y; }
  std::pair<double, double> operator()(double theta, double y) const;

  const QuadStepper& base_stepper() const noexcept { return base_step_; }
  const QuadStepper& fiber_stepper() const noexcept { return fiber_step_; }

  /// Same system with a different coupling strength.
  SkewSystem with_alpha(double alpha) const;

private:
  std::shared_ptr<const coords::ExpandingModel> base_;
  mt::MTCertificate fiber_;
  double b_;
  double alpha_;
  Polynomial phi_;
  double scale_ = 1.0;
  double y_bound_;
  double alpha_max_ = 0.0;
  QuadStepper base_step_;
  QuadStepper fiber_step_;
};

/// I_a x I^_b is forward invariant at coupling alpha (|phi| <= 1).
bool rectangle_invariant(double b, double alpha);
/// Largest alpha passing rectangle_invariant, by bisection.
double find_alpha_max(double b);

SkewSystem build_system(std::shared_ptr<const coords::ExpandingModel> base,
                        const mt::MTCertificate& fiber, double alpha, Polynomial phi);

struct RecurrenceEvent {
  long step;
  double abs_y;
};

struct OrbitOptions {
  long burn_in = 0;
  double delta = 0.0;             // record |y_i| < delta
  bool record_events = false;
  bool inverse_norm = false;      // accumulate log ||DF^{-1}||
  std::vector<long> checkpoints;  // steps at which S_n is sampled
};

struct OrbitAccumulator {
  QuadState base;  // current base point, x coordinate
  double y = 0.0;
  long n = 0;
  double log_base = 0.0;      // sum log|h'(theta_i)|
  double log_fiber = 0.0;     // sum log|2 y_i|
  double log_inv_norm = 0.0;  // sum log||DF^{-1}(theta_i, y_i)||
  double recurrence_sum = 0.0;  // S_n = sum over |y_i| < delta of log(1/|y_i|)
  std::vector<RecurrenceEvent> events;
  std::vector<double> checkpoint_sums;

  double lambda_theta() const { return n ? log_base / n : 0.0; }
  double lambda_y() const { return n ? log_fiber / n : 0.0; }
  double inv_norm_average() const { return n ? log_inv_norm / n : 0.0; }
};

OrbitAccumulator iterate(const SkewSystem& sys, double theta0, double y0, long n,
                         const OrbitOptions& opts = {});

/// f_n(theta, y) and d f_n / d y = prod Q_b'(y_i), in plain arithmetic.
std::pair<double, double> fiber_iterate(const SkewSystem& sys, double theta0, double y0, int n);
/// Central difference of f_n in y with a step scaled to the derivative.
double fiber_derivative_fd(const SkewSystem& sys, double theta0, double y0, int n);

struct OrbitExponents {
  std::size_t id = 0;
  double theta0 = 0.0;
  double y0 = 0.0;
  double lambda_theta = 0.0;
  double lambda_y = 0.0;
  double inv_norm_average = 0.0;
  long n = 0;
};

struct SampleStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

SampleStats sample_stats(const std::vector<double>& v);

struct LyapunovResult {
  std::vector<OrbitExponents> orbits;
  SampleStats theta;
  SampleStats y;
  SampleStats inv_norm;
  std::uint64_t seed = 0;
};

/// Initial condition of ensemble member `id`, uniform on I_a x I^_b.
std::pair<double, double> initial_condition(const SkewSystem& sys, std::uint64_t seed,
                                            std::size_t id);

LyapunovResult lyapunov_exponents(const SkewSystem& sys, std::size_t orbits, long n, long burn_in,
                                  std::uint64_t seed, int workers = 1);

struct BEConstants {
  double alpha = 0.0;
  double sigma = 0.0;
  double delta_star = 0.0;
  double c_star = 0.0;
  int n_alpha = 0;
  int m_alpha = 0;
  double eta = 0.0;
  double r0 = 0.0;
  double beta = 0.0;  // not derived; filled from fits when available
};

BEConstants compute_constants(double alpha, double sigma);
nlohmann::json to_json(const BEConstants& c);

struct SigmaFit {
  double sigma = 0.0;      // clamped into (1, 2)
  double raw_sigma = 0.0;  // exp(fitted slope)
  double log_c = 0.0;      // fitted intercept
  double residual = 0.0;   // rms of the fit
  bool clamped = false;
  int segments = 0;
};

/// Least-squares fit log|(Q_b^k)'(y)| = log C + k log sigma over orbit
/// segments of length segment_length that stay outside (-radius, radius).
SigmaFit estimate_sigma(const mt::MTCertificate& fiber, double radius, int trials,
                        int segment_length, std::uint64_t seed);

/// Operator 2-norm of [[p, 0], [r, q]].
double lower_triangular_norm(double p, double r, double q) noexcept;

}  // namespace mtlab::skew
