#pragma once

#include <cmath>

namespace mtlab {

// Minimal double-double arithmetic (error-free transforms), enough to
// evaluate quadratic orbits with ~106 bits for certificates.
struct DDouble {
  double hi = 0.0;
  double lo = 0.0;

  constexpr DDouble() = default;
  constexpr DDouble(double h) : hi(h), lo(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr DDouble(double h, double l) : hi(h), lo(l) {}

  double value() const { return hi + lo; }
};

namespace dd_detail {
inline DDouble two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}
inline DDouble quick_two_sum(double a, double b) {
  double s = a + b;
  return {s, b - (s - a)};
}
inline DDouble two_prod(double a, double b) {
  double p = a * b;
  return {p, std::fma(a, b, -p)};
}
}  // namespace dd_detail

inline DDouble operator+(DDouble a, DDouble b) {
  DDouble s = dd_detail::two_sum(a.hi, b.hi);
  DDouble t = dd_detail::two_sum(a.lo, b.lo);
  s.lo += t.hi;
  s = dd_detail::quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return dd_detail::quick_two_sum(s.hi, s.lo);
}

inline DDouble operator-(DDouble a) { return {-a.hi, -a.lo}; }
inline DDouble operator-(DDouble a, DDouble b) { return a + (-b); }

inline DDouble operator*(DDouble a, DDouble b) {
  DDouble p = dd_detail::two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return dd_detail::quick_two_sum(p.hi, p.lo);
}

inline DDouble abs(DDouble a) { return a.hi < 0.0 || (a.hi == 0.0 && a.lo < 0.0) ? -a : a; }

}  // namespace mtlab
