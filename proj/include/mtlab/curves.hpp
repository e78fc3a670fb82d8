#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlab/expanding_coords.hpp"
#include "mtlab/skew_product.hpp"

namespace mtlab::curves {

using coords::Interval;
using coords::InverseBranch;

/// Chebyshev interpolant on first-kind (interior) nodes. Values go through
/// barycentric interpolation; derivatives through the coefficient series,
/// truncated at the rounding floor so differentiation does not amplify noise.
class ChebCurve {
public:
  ChebCurve(Interval dom, std::vector<double> values);

  /// Samples f, doubling the node count from `degree` up to `max_degree`
  /// until the off-node residual is below tol * max(1, sup|f|).
  static ChebCurve fit(Interval dom, const std::function<double(double)>& f, int degree = 64,
                       int max_degree = 512, double tol = 1e-9);
  static std::vector<double> nodes(Interval dom, int n);

  const Interval& domain() const noexcept { return dom_; }
  int size() const noexcept { return static_cast<int>(values_.size()); }
  const std::vector<double>& node_points() const noexcept { return nodes_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  double residual() const noexcept { return residual_; }

  double operator()(double t) const;
  double derivative(double t, int order) const;

private:
  const std::vector<double>& derivative_coeffs(int order) const;

  Interval dom_;
  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<double> weights_;
  std::vector<double> coeffs_;
  double residual_ = 0.0;
  mutable std::vector<std::vector<double>> dcoeffs_;  // dcoeffs_[k]: order k+1
};

/// F^n of a horizontal segment, as a graph over a level-0 element.
struct AdmissibleCurve {
  ChebCurve X;
  std::size_t element = 0;
  double y0 = 0.0;
  std::vector<InverseBranch> chain;  // P1 branches in push order
  int depth() const noexcept { return static_cast<int>(chain.size()); }
};

/// Depth-0 curve Y = y0 on a level-0 element.
AdmissibleCurve horizontal(const skew::SkewSystem& sys, std::size_t element, double y0);

/// X1(theta) = alpha phi(tau theta) + Q_b(X(tau theta)), tau the branch.
AdmissibleCurve push_curve(const skew::SkewSystem& sys, const AdmissibleCurve& X,
                           const InverseBranch& branch);
std::vector<AdmissibleCurve> push_all(const skew::SkewSystem& sys, const AdmissibleCurve& X);

/// Every intermediate curve of the chain, depth 0 first.
std::vector<AdmissibleCurve> evolve_chain(const skew::SkewSystem& sys, double y0,
                                          const std::vector<InverseBranch>& chain);
AdmissibleCurve evolve_horizontal(const skew::SkewSystem& sys, double y0,
                                  const std::vector<InverseBranch>& chain);
/// All words of length n starting on `element`; DepthExceeded above `cap`.
std::vector<AdmissibleCurve> evolve_all(const skew::SkewSystem& sys, std::size_t element,
                                        double y0, int n, std::size_t cap = 4096);

/// Random admissible chain of n P1 branches starting on `element`.
std::vector<InverseBranch> random_chain(const coords::ExpandingModel& model, std::size_t element,
                                        int n, std::uint64_t seed, std::uint64_t stream);

/// `count` curves with depths uniform in [depth_min, depth_max], random
/// starting elements, chains and y0 in the fiber interval. Chains and y0
/// depend only on the seed, not on alpha.
std::vector<AdmissibleCurve> random_curve_set(const skew::SkewSystem& sys, std::size_t count,
                                              int depth_min, int depth_max, std::uint64_t seed);

/// f_n(tau_n theta, y0) by direct iteration along the chain: the oracle for
/// curve node values.
double direct_value(const skew::SkewSystem& sys, double y0, const std::vector<InverseBranch>& chain,
                    double theta);

/// T(theta) = sum_k c_k (phi o tau_k)'(theta), tau_k the composition of the
/// last k chain branches.
struct TFamilyElement {
  std::size_t element = 0;
  std::vector<InverseBranch> chain;  // push order, as for curves
  std::vector<double> c;             // c[0] = c_1 = 1

  int depth() const noexcept { return static_cast<int>(chain.size()); }
  /// Values of (phi o tau_k)'(theta), k = 1..depth.
  std::vector<double> terms(const skew::SkewSystem& sys, double theta) const;
  double operator()(const skew::SkewSystem& sys, double theta) const;
  /// Same as terms() but with tau_k' from Richardson-extrapolated finite
  /// differences of the branch evaluator.
  std::vector<double> terms_fd(const skew::SkewSystem& sys, double theta) const;
};

/// Bound on sum_{k > depth} 4^{k-1} |(phi o tau_k)'| given sup|phi'|.
double truncation_bound(double lambda_g, int depth, double phi_prime_sup);
double phi_prime_sup(const skew::SkewSystem& sys, int grid = 4000);

/// The T matching a curve chain: c_{k+1} = c_k D, with D = Q_b'(X(tau theta0)) at
/// the midpoint theta0 of each image element.
TFamilyElement matched_t(const skew::SkewSystem& sys, const std::vector<AdmissibleCurve>& chain);

/// sup over the node grid of |(X' - alpha T)^{(i)}|, i = 0..l.
std::vector<double> check_linear_approx(const skew::SkewSystem& sys,
                                        const std::vector<AdmissibleCurve>& chain, int l = 3);

struct NonFlatReport {
  int l0 = 0;
  double b_hat = 0.0;
  double a_hat = 0.0;
  std::vector<double> b_per_level;  // B^ for l = 1..l_max
  std::vector<double> per_curve_b;  // at l0
  std::vector<double> per_curve_a;
};

NonFlatReport check_nonflat(const std::vector<AdmissibleCurve>& curves, double alpha, int l_max = 8,
                            int grid = 256);
nlohmann::json to_json(const NonFlatReport& r);

/// |{theta in omega : |X| <= alpha eps}| / |I_a| for each eps.
std::vector<double> curve_recurrence(const AdmissibleCurve& X, double alpha,
                                     const std::vector<double>& eps, double i_a_length);

struct SeparationResult {
  int m_star = 0;
  double eps0 = 0.0;  // max sup|Z+ - Z-| / alpha at m_star
  std::vector<std::int8_t> witness_plus;
  std::vector<std::int8_t> witness_minus;
  std::vector<double> best_per_level;
};

struct SeparationOptions {
  double threshold = 1e-4;  // in units of alpha
  bool central_only = false;
  std::size_t pair_cap = 256;
};

/// Siblings at level M are chains whose first branches are mirror images
/// (x and -x) and whose remaining branches agree, so both reach the same
/// element. Throws NoSeparation if no M <= m_search meets the threshold.
SeparationResult separation_test(const skew::SkewSystem& sys, const AdmissibleCurve& X, int m_search,
                                 const SeparationOptions& opts = {});

/// The two P1 branches adjacent to theta = 0 on `element`, mirror images in x.
std::pair<InverseBranch, InverseBranch> central_siblings(const coords::ExpandingModel& model,
                                                         std::size_t element);

}  // namespace mtlab::curves
