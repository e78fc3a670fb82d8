#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace mtlab::mt {

/// Parameter c of Q_c(x) = c - x^2, restricted to (1, 2].
class QuadraticParam {
public:
  explicit QuadraticParam(double c);
  double value() const noexcept { return c_; }

private:
  double c_;
};

inline double quadratic(double c, double x) noexcept { return c - x * x; }

double iterate_quadratic(QuadraticParam c, double x, int n);

/// Certificate that 0 is strictly preperiodic for Q_c with the given
/// preperiod k and period p.
struct MTCertificate {
  QuadraticParam param{2.0};
  int preperiod = 0;
  int period = 0;
  double residual = 0.0;        // |Q^{k+p}(0) - Q^k(0)|
  double strictness_gap = 0.0;  // min distance between Q^i(0), 0 <= i < k+p
};

/// Sorted post-critical set {Q_c^n(0) : n >= 1}.
struct PostCriticalSet {
  std::vector<double> points;
};

inline constexpr double kRootTolerance = 1e-12;
inline constexpr double kStrictnessTolerance = 1e-6;
inline constexpr double kDedupTolerance = 1e-9;

/// First root of G(c) = Q_c^{k+p}(0) - Q_c^k(0) on the bracket, found by
/// bisection to width 1e-14 and two safeguarded Newton steps. Other roots
/// may exist inside the bracket; only the one isolated by bisection is
/// returned.
MTCertificate find_mt_parameter(int preperiod, int period, std::pair<double, double> bracket);

/// Certificate for a parameter given directly (e.g. c = 2 from a config
/// file); throws StrictnessViolation or NotPreperiodic when it does not hold.
MTCertificate certify(double c, int preperiod, int period);

PostCriticalSet postcritical_set(const MTCertificate& cert);

nlohmann::json to_json(const MTCertificate& cert);

}  // namespace mtlab::mt
