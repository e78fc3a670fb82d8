#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlab/curves.hpp"
#include "mtlab/skew_product.hpp"

namespace mtlab::measures {

using coords::Interval;

/// Uniform n_theta x n_y cell grid on a rectangle; cells are numbered
/// theta-major: index = i * n_y + j.
struct CellGrid {
  Interval theta;
  Interval y;
  int n_theta = 0;
  int n_y = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(n_theta) * n_y; }
  double d_theta() const noexcept { return theta.length() / n_theta; }
  double d_y() const noexcept { return y.length() / n_y; }
  int column(double t) const noexcept;
  int row(double v) const noexcept;
  std::size_t cell(double t, double v) const noexcept {
    return static_cast<std::size_t>(column(t)) * n_y + row(v);
  }
};

CellGrid system_grid(const skew::SkewSystem& sys, int n_theta, int n_y);

/// Sparse column-stochastic matrix: column c sends weight[k] to row[k] for
/// k in [start[c], start[c+1]).
struct StochasticOperator {
  std::size_t n = 0;
  std::vector<std::uint64_t> start;
  std::vector<std::uint32_t> row;
  std::vector<double> weight;

  /// out = P in
  void apply(std::span<const double> in, std::span<double> out) const;
  /// max over columns of |column sum - 1|
  double column_sum_error() const;
};

struct PowerOptions {
  double tol = 1e-10;  // L1 step change
  int max_iter = 10000;
};

struct PowerResult {
  std::vector<double> density;
  int iterations = 0;
  bool converged = false;
  double last_step = 0.0;
  std::vector<double> log;  // L1 step change every 10 iterations
};

/// Fixed point of P by the lazy iteration d <- (d + P d) / 2. Same fixed
/// points as P, but an eigenvalue near -1 (a period-2 cycle of strips)
/// no longer stalls convergence.
PowerResult stationary(const StochasticOperator& P, std::vector<double> start,
                       const PowerOptions& opts = {});

double l1_distance(std::span<const double> a, std::span<const double> b);

struct UlamEstimate {
  CellGrid grid;
  StochasticOperator op;
  std::vector<double> density;
  double residual = 0.0;  // ||P d - d||_1
  int iterations = 0;
  bool converged = false;
  std::vector<double> log;
};

/// Jittered k x k stratified sampling per cell, k = floor(sqrt(samples_per_cell)),
/// seeded per cell.
StochasticOperator ulam_operator(const skew::SkewSystem& sys, const CellGrid& grid,
                                 int samples_per_cell, std::uint64_t seed, int workers = 1);
/// Same for the base map alone on n_theta cells of I_a.
StochasticOperator base_ulam_operator(const coords::ExpandingModel& model, int n_theta,
                                      int samples_per_cell, std::uint64_t seed);

/// Converged or not, the estimate is returned; callers check `converged`.
UlamEstimate build_ulam(const skew::SkewSystem& sys, int n_theta, int n_y, int samples_per_cell,
                        std::uint64_t seed, int workers = 1, const PowerOptions& opts = {});

std::vector<double> theta_marginal(const UlamEstimate& u);
std::vector<double> y_marginal(const UlamEstimate& u);

struct UniquenessResult {
  double max_distance = 0.0;
  std::vector<double> pairwise;  // row-major upper triangle
  std::vector<int> iterations;
};

/// Throws NotConverged if any start fails to converge.
UniquenessResult uniqueness_diagnostic(const StochasticOperator& P, int n_starts, std::uint64_t seed,
                                       const PowerOptions& opts = {});

struct AttractorEstimate {
  int n = 0;
  CellGrid grid;
  std::vector<std::uint8_t> cells;
  std::size_t count() const;
};

/// Cells met by F^n(I_a x I^_b). Each vertical fiber is mapped as an
/// interval, so the fiber of F^n(rectangle) over theta is a union of
/// intervals, one per n-step preimage chain; each column is sampled at
/// `probes` interior points plus its edges.
AttractorEstimate attractor(const skew::SkewSystem& sys, int n, int n_theta, int n_y, int probes = 4);
/// Fraction of cells of the grid that belong to exactly one of the two sets.
double symmetric_difference(const AttractorEstimate& a, const AttractorEstimate& b);

struct SlowRecurrenceOptions {
  std::size_t orbits = 1000;
  std::vector<long> n_list{1000, 10000, 100000};
  double epsilon = 3e-3;
  double delta_tilde = 0.1;
  double eta = 0.0;  // from compute_constants
  long burn_in = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct SlowRecurrenceResult {
  double delta = 0.0;
  int big_delta = 0;  // floor(log(1/delta) / log lambda_g)
  std::vector<long> n_list;
  std::vector<std::vector<double>> sums;  // sums[orbit][k] = S_{n_k}
  std::vector<double> fractions;          // |{S_n > eps n}| / orbits
  std::vector<double> mean_rate;          // mean of S_n / n
  std::vector<double> rate_stderr;
  double slope = 0.0;  // of log(fraction) against sqrt(n)
  double intercept = 0.0;
  double r2 = 0.0;
  bool fit_valid = false;  // false if some fraction is zero
};

SlowRecurrenceResult slow_recurrence(const skew::SkewSystem& sys, const SlowRecurrenceOptions& opts);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Admissible curve on `element` whose M-step fiber image crosses zero
/// near the middle of the element: y0 is tuned by bisection so that
/// f_M(theta_mid, Y(theta_mid)) = 0, with Y pushed along `chain`.
curves::AdmissibleCurve critical_return_curve(const skew::SkewSystem& sys,
                                              const std::vector<coords::InverseBranch>& chain, int m);

struct CriticalReturnResult {
  int m = 0;
  std::vector<double> r;
  std::vector<double> fractions;
  double beta0 = 0.0;  // minus the slope of log(fraction) against r
  double r2 = 0.0;
  bool fit_valid = false;
};

/// Fraction of theta, uniform on the curve's element, with
/// |f_m(theta, Y(theta))| <= sqrt(alpha) e^{-r}.
CriticalReturnResult critical_return_test(const skew::SkewSystem& sys,
                                          const curves::AdmissibleCurve& Y, int m,
                                          std::span<const double> r, std::size_t samples,
                                          std::uint64_t seed);

struct VerticalBoundReport {
  double min_lambda_y = 0.0;
  double bound = 0.0;  // (eta / 2) log sigma
  double max_inv_norm = 0.0;
  double inv_norm_bound = 0.0;  // -(eta / 3) log sigma
  double c_matrix = 0.0;        // C in ||DF^-1|| <= (1 + C alpha) / |Q_b'|
  int per_orbit_violations = 0;  // orbits with inv_norm > C alpha - Lambda_y
  bool lambda_ok = false;
  bool inv_norm_ok = false;
};

VerticalBoundReport vertical_exponent_vs_bound(const skew::SkewSystem& sys,
                                               const skew::LyapunovResult& lyap,
                                               const skew::BEConstants& constants);

nlohmann::json to_json(const SlowRecurrenceResult& r);
nlohmann::json to_json(const CriticalReturnResult& r);
nlohmann::json to_json(const VerticalBoundReport& r);

}  // namespace mtlab::measures
