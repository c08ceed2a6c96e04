#pragma once

// Smooth cutoff functions shared by the corrector, spectral and
// effective-dynamics code. The formulas are fixed bit-exactly.

#include <cmath>

namespace chainlab::cutoff {

/// g(t) = exp(-1/t) for t > 0, else 0.
inline double bump_edge(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

inline double bump_edge_d1(double t) { return t > 0.0 ? bump_edge(t) / (t * t) : 0.0; }

inline double bump_edge_d2(double t) {
  if (t <= 0.0) return 0.0;
  const double t2 = t * t;
  return bump_edge(t) * (1.0 / (t2 * t2) - 2.0 / (t2 * t));
}

/// Smooth step: 0 for x <= 1, 1 for x >= 2, increasing in between.
inline double rising(double x) {
  if (x <= 1.0) return 0.0;
  if (x >= 2.0) return 1.0;
  const double a = bump_edge(x - 1.0);
  const double b = bump_edge(2.0 - x);
  return a / (a + b);
}

inline double rising_d1(double x) {
  if (x <= 1.0 || x >= 2.0) return 0.0;
  const double ga = bump_edge(x - 1.0), gb = bump_edge(2.0 - x);
  const double da = bump_edge_d1(x - 1.0), db = bump_edge_d1(2.0 - x);
  const double den = ga + gb;
  return (da * gb + ga * db) / (den * den);
}

inline double rising_d2(double x) {
  if (x <= 1.0 || x >= 2.0) return 0.0;
  const double a = x - 1.0, b = 2.0 - x;
  const double ga = bump_edge(a), gb = bump_edge(b);
  const double da = bump_edge_d1(a), db = bump_edge_d1(b);
  const double dda = bump_edge_d2(a), ddb = bump_edge_d2(b);
  const double num = da * gb + ga * db;
  const double num_d = dda * gb - ga * ddb;
  const double den = ga + gb;
  const double den_d = da - db;
  return (num_d * den - 2.0 * num * den_d) / (den * den * den);
}

/// psi: 1 on |x| <= 1, 0 on |x| >= 2.
inline double plateau(double x) { return 1.0 - rising(std::abs(x)); }

/// chi: exp(4 - 1/((x-1)(2-x))) on (1,2), else 0. Maximum value 1 at x = 3/2.
inline double bump(double x) {
  if (x <= 1.0 || x >= 2.0) return 0.0;
  return std::exp(4.0 - 1.0 / ((x - 1.0) * (2.0 - x)));
}

inline double bump_d1(double x) {
  if (x <= 1.0 || x >= 2.0) return 0.0;
  const double w = (x - 1.0) * (2.0 - x);
  return bump(x) * (3.0 - 2.0 * x) / (w * w);
}

/// chi'/chi, finite on the open support.
inline double bump_log_d1(double x) {
  const double w = (x - 1.0) * (2.0 - x);
  return (3.0 - 2.0 * x) / (w * w);
}

}  // namespace chainlab::cutoff
