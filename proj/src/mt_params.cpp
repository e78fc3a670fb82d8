#include "mtlab/mt_params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mtlab/ddouble.hpp"
#include "mtlab/error.hpp"

namespace mtlab::mt {

QuadraticParam::QuadraticParam(double c) : c_(c) {
  if (!(c > 1.0 && c <= 2.0)) {
    std::ostringstream os;
    os << "parameter c=" << c << " outside (1, 2]";
    fail("OutOfRange", os.str());
  }
}

double iterate_quadratic(QuadraticParam c, double x, int n) {
  const double cv = c.value();
  for (int i = 0; i < n; ++i) x = quadratic(cv, x);
  return x;
}

namespace {

std::vector<DDouble> critical_orbit(DDouble c, int len) {
  std::vector<DDouble> orbit(static_cast<std::size_t>(len) + 1);
  orbit[0] = DDouble(0.0);
  for (int i = 0; i < len; ++i) orbit[i + 1] = c - orbit[i] * orbit[i];
  return orbit;
}

// G(c) = Q_c^{k+p}(0) - Q_c^k(0) and dG/dc, in double-double.
std::pair<DDouble, double> g_and_slope(double c, int k, int p) {
  DDouble x(0.0);
  double dx = 0.0;
  DDouble xk;
  double dxk = 0.0;
  for (int i = 0; i < k + p; ++i) {
    if (i == k) {
      xk = x;
      dxk = dx;
    }
    dx = 1.0 - 2.0 * x.value() * dx;
    x = DDouble(c) - x * x;
  }
  return {x - xk, dx - dxk};
}

int sign_of(DDouble v) {
  const double s = v.hi != 0.0 ? v.hi : v.lo;
  return (s > 0.0) - (s < 0.0);
}

MTCertificate make_certificate(double c, int k, int p) {
  const auto orbit = critical_orbit(DDouble(c), k + p);
  MTCertificate cert{QuadraticParam(c), k, p, 0.0, 0.0};
  cert.residual = std::abs((orbit[k + p] - orbit[k]).value());
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k + p; ++i)
    for (int j = i + 1; j < k + p; ++j)
      gap = std::min(gap, std::abs((orbit[i] - orbit[j]).value()));
  cert.strictness_gap = gap;
  return cert;
}

void require_strict(const MTCertificate& cert) {
  if (!(cert.strictness_gap > kStrictnessTolerance)) {
    std::ostringstream os;
    os << "critical orbit of c=" << cert.param.value() << " has coincident points (gap "
       << cert.strictness_gap << "); preperiod/period (" << cert.preperiod << ","
       << cert.period << ") is not strict";
    fail("StrictnessViolation", os.str());
  }
}

}  // namespace

MTCertificate find_mt_parameter(int preperiod, int period, std::pair<double, double> bracket) {
  auto [lo, hi] = bracket;
  if (preperiod < 1 || period < 1) fail("ConfigError", "preperiod and period must be positive");
  if (!(lo >= 1.0 && lo < hi && hi <= 2.0))
    fail("ConfigError", "bracket must satisfy 1 <= lo < hi <= 2");

  const int k = preperiod;
  const int p = period;
  DDouble glo = g_and_slope(lo, k, p).first;
  DDouble ghi = g_and_slope(hi, k, p).first;
  int slo = sign_of(glo);
  int shi = sign_of(ghi);

  double root;
  if (shi == 0) {
    root = hi;
  } else if (slo == 0) {
    root = lo;
  } else if (slo == shi) {
    std::ostringstream os;
    os << "G has constant sign on [" << lo << ", " << hi << "] for (k,p)=(" << k << "," << p
       << ")";
    fail("NoSignChange", os.str());
  } else {
    while (hi - lo > 1e-14) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const int sm = sign_of(g_and_slope(mid, k, p).first);
      if (sm == 0) {
        lo = hi = mid;
        break;
      }
      if (sm == slo)
        lo = mid;
      else
        hi = mid;
    }
    root = 0.5 * (lo + hi);
    // Safeguarded Newton: a step leaving the final bracket is rejected.
    for (int it = 0; it < 2; ++it) {
      auto [g, slope] = g_and_slope(root, k, p);
      if (slope == 0.0 || !std::isfinite(slope)) break;
      const double next = root - g.value() / slope;
      if (next < lo || next > hi) break;
      root = next;
    }
  }

  MTCertificate cert = make_certificate(root, k, p);
  if (!(cert.residual < kRootTolerance)) {
    std::ostringstream os;
    os << "root refinement stalled at residual " << cert.residual;
    fail("NotConverged", os.str());
  }
  require_strict(cert);
  return cert;
}

MTCertificate certify(double c, int preperiod, int period) {
  QuadraticParam param(c);
  MTCertificate cert = make_certificate(param.value(), preperiod, period);
  if (!(cert.residual < kRootTolerance)) {
    // Values typed with ~10 digits are refined to the nearby root.
    const double w = std::max(1e-7, 1e3 * cert.residual);
    cert = find_mt_parameter(preperiod, period,
                             {std::max(1.0, c - w), std::min(2.0, c + w)});
  }
  require_strict(cert);
  return cert;
}

PostCriticalSet postcritical_set(const MTCertificate& cert) {
  const int len = cert.preperiod + cert.period;
  std::vector<double> pts;
  double x = 0.0;
  for (int n = 1; n <= len; ++n) {
    x = quadratic(cert.param.value(), x);
    pts.push_back(x);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double v : pts)
    if (out.empty() || v - out.back() > kDedupTolerance) out.push_back(v);
  return {out};
}

nlohmann::json to_json(const MTCertificate& cert) {
  return {{"c", cert.param.value()},
          {"preperiod", cert.preperiod},
          {"period", cert.period},
          {"residual", cert.residual},
          {"strictness_gap", cert.strictness_gap},
          {"postcritical", postcritical_set(cert).points}};
}

}  // namespace mtlab::mt
