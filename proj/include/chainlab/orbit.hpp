#pragma once

// Unit-energy periodic orbit of the free oscillator started at (sqrt2, 0),
// its period, and the decay constants kappa_{k,n}.

#include <chainlab/free_oscillator.hpp>
#include <chainlab/theta_profile.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>
#include <unsupported/Eigen/FFT>

namespace chainlab {

struct OrbitSample {
  double k = 2.0;
  double tau = 0.0;
  std::vector<double> times, P, Q;
};

struct KappaResult {
  double k = 2.0;
  int n = 1;
  double kappa = 0.0;
  double stderr_estimate = 0.0;
};

namespace detail {

using OrbitState = std::array<double, 2>;  // (P, Q)

struct FreeFlow {
  double k;
  void operator()(const OrbitState& x, OrbitState& dx, double) const {
    dx[0] = -signed_power(x[1], k);
    dx[1] = x[0];
  }
};

inline void rk78_advance(const FreeFlow& f, OrbitState& x, double duration, double max_step) {
  if (duration == 0.0) return;
  boost::numeric::odeint::runge_kutta_fehlberg78<OrbitState> stepper;
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(duration) / max_step)));
  const double dt = duration / n;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    stepper.do_step(f, x, t, dt);
    t += dt;
  }
}

}  // namespace detail

/// Period as the orbit integral of dtheta/omega (trapezoid rule, periodic integrand).
inline double free_period(double k, int m = 8192) {
  const FreeOscillator osc(k);
  double s = 0.0;
  for (int j = 0; j < m; ++j) s += 1.0 / osc.omega(2.0 * std::numbers::pi * j / m);
  return s * 2.0 * std::numbers::pi / m;
}

/// Period as the first upward return of Q through 0, from a direct ODE integration.
inline double free_period_ode(double k, double max_step = 1e-3) {
  const detail::FreeFlow f{k};
  detail::OrbitState x{std::sqrt(2.0), 0.0};
  double t = 0.0;
  // Advance half a period in coarse steps so the start point is not found again.
  bool passed_negative = false;
  detail::OrbitState prev = x;
  double t_prev = t;
  while (true) {
    prev = x;
    t_prev = t;
    detail::rk78_advance(f, x, max_step, max_step);
    t += max_step;
    if (x[1] < 0.0) passed_negative = true;
    if (passed_negative && prev[1] < 0.0 && x[1] >= 0.0) break;
    if (t > 1e4) throw std::runtime_error("free orbit did not return");
  }
  // Newton on Q(t) = 0 with dQ/dt = P, from the last point before the crossing.
  x = prev;
  t = t_prev;
  for (int it = 0; it < 50; ++it) {
    const double dt = -x[1] / x[0];
    detail::rk78_advance(f, x, dt, max_step);
    t += dt;
    if (std::abs(dt) < 1e-15 * t) break;
  }
  return t;
}

/// M_t uniform time samples over one period of the unit-energy orbit.
inline OrbitSample free_orbit(double k, int m_t = 4096, double max_step = 1e-3) {
  OrbitSample o;
  o.k = k;
  o.tau = free_period(k);
  o.times.resize(m_t);
  o.P.resize(m_t);
  o.Q.resize(m_t);
  const detail::FreeFlow f{k};
  detail::OrbitState x{std::sqrt(2.0), 0.0};
  const double dt = o.tau / m_t;
  for (int j = 0; j < m_t; ++j) {
    o.times[j] = j * dt;
    o.P[j] = x[0];
    o.Q[j] = x[1];
    detail::rk78_advance(f, x, dt, max_step);
  }
  return o;
}

namespace detail {

inline double antiderivative_variance(const std::vector<double>& q, double tau, int n) {
  const int m = static_cast<int>(q.size());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> c;
  fft.fwd(c, q);
  double var = 0.0;
  for (int j = 1; j < m; ++j) {
    if (2 * j == m) continue;
    const int f = j <= m / 2 ? j : j - m;
    const std::complex<double> w(0.0, 2.0 * std::numbers::pi * f / tau);
    const std::complex<double> z = c[j] / std::pow(w, 2 * n - 1);
    var += std::norm(z);
  }
  return var / (static_cast<double>(m) * m);
}

}  // namespace detail

/// Variance of the zero-mean (2n-1)-fold periodic antiderivative of the orbit Q.
/// Real-series convention: kappa = time average of Phat^2 = sum over m != 0 of |c_m|^2.
inline KappaResult kappa(double k, int n, int m_t = 4096) {
  if (n < 1) throw std::invalid_argument("kappa requires n >= 1");
  const auto o = free_orbit(k, m_t);
  std::vector<double> half(m_t / 2);
  for (int j = 0; j < m_t / 2; ++j) half[j] = o.Q[2 * j];
  KappaResult r;
  r.k = k;
  r.n = n;
  r.kappa = detail::antiderivative_variance(o.Q, o.tau, n);
  r.stderr_estimate = std::abs(r.kappa - detail::antiderivative_variance(half, o.tau, n));
  return r;
}

}  // namespace chainlab
