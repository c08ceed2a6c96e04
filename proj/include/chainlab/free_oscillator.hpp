#pragma once

// Geometry of the free oscillator H_f(P,Q) = P^2/2 + |Q|^{2k}/(2k):
// energy, the unit-shell radius r(theta), the angular speed omega(theta),
// and the (theta, E) shell coordinates that realize its scaling symmetry.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace chainlab {

/// |q|^{2k-2} q, with a multiplication fast path for small integer k.
inline double signed_power(double q, double k) {
  const double e = 2.0 * k - 1.0;
  if (k == std::floor(k) && k <= 8.0) {
    const double q2 = q * q;
    double r = q;
    for (int i = 1; i < static_cast<int>(k); ++i) r *= q2;
    return r;
  }
  return std::copysign(std::pow(std::abs(q), e), q);
}

/// |q|^{2k}/(2k)
inline double pinning_potential(double q, double k) {
  if (k == std::floor(k) && k <= 8.0) return q * signed_power(q, k) / (2.0 * k);
  return std::pow(std::abs(q), 2.0 * k) / (2.0 * k);
}

/// d/dq of |q|^{2k-2} q, i.e. (2k-1)|q|^{2k-2}.
inline double signed_power_d1(double q, double k) {
  if (q == 0.0) return k == 1.0 ? 1.0 : 0.0;
  return (2.0 * k - 1.0) * std::pow(std::abs(q), 2.0 * k - 2.0);
}

inline double hf_energy(double p, double q, double k) { return 0.5 * p * p + pinning_potential(q, k); }

struct ShellPoint {
  double theta;   // in [0, 2 pi)
  double energy;  // H_f
};

struct PhasePoint {
  double p;
  double q;
};

/// The free oscillator with homogeneity 2k. k = 1 is accepted as a
/// harmonic test mode.
class FreeOscillator {
 public:
  explicit FreeOscillator(double k) : k_(k) {
    if (!(k >= 1.0)) throw std::invalid_argument("free oscillator requires k >= 1");
  }

  double k() const { return k_; }

  /// Exponent of the time rescaling: orbits at energy E run E^alpha times faster.
  double time_exponent() const { return 0.5 - 0.5 / k_; }

  double energy(double p, double q) const { return hf_energy(p, q, k_); }

  /// Unique positive root of r^2 cos^2/2 + r^{2k}|sin|^{2k}/(2k) = 1.
  double radius(double theta) const {
    const double c = std::cos(theta), s = std::abs(std::sin(theta));
    const double a = std::sqrt(2.0);
    const double b = std::pow(2.0 * k_, 0.5 / k_);
    auto f = [&](double r) { return 0.5 * r * r * c * c + std::pow(r * s, 2.0 * k_) / (2.0 * k_) - 1.0; };
    auto df = [&](double r) { return r * c * c + std::pow(r * s, 2.0 * k_ - 1.0) * s; };

    double hi = std::numeric_limits<double>::infinity();
    if (std::abs(c) > 0.0) hi = std::min(hi, a / std::abs(c));
    if (s > 0.0) hi = std::min(hi, b / s);
    double lo = std::min(a, b) / std::sqrt(2.0);

    // f is convex and increasing on r > 0, so Newton from the right end
    // decreases monotonically to the root; bisection guards round-off.
    double r = hi;
    for (int it = 0; it < 100; ++it) {
      const double fr = f(r);
      if (fr > 0.0) hi = std::min(hi, r); else lo = std::max(lo, r);
      double next = r - fr / df(r);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - r) <= 1e-13 * r) return next - f(next) / df(next);
      r = next;
    }
    return r;
  }

  /// d theta / dt on the unit shell.
  double omega(double theta) const { return omega(theta, radius(theta)); }

  double omega(double theta, double r) const {
    const double c = std::cos(theta), s = std::abs(std::sin(theta));
    return c * c + std::pow(r, 2.0 * k_ - 2.0) * std::pow(s, 2.0 * k_);
  }

  ShellPoint to_shell(double p, double q) const {
    const double e = energy(p, q);
    if (!(e > 0.0)) throw std::domain_error("undefined shell coordinates");
    const double u = p / std::sqrt(e);
    const double v = q / std::pow(e, 0.5 / k_);
    double theta = std::atan2(v, u);
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    return {theta, e};
  }

  PhasePoint from_shell(double theta, double energy) const { return from_shell(theta, energy, radius(theta)); }

  PhasePoint from_shell(double theta, double energy, double r) const {
    return {std::sqrt(energy) * r * std::cos(theta), std::pow(energy, 0.5 / k_) * r * std::sin(theta)};
  }

  /// Partial derivatives of theta(P,Q) (shell angle) with respect to P and Q.
  PhasePoint theta_gradient(double p, double q) const {
    const double e = energy(p, q);
    const double ep = p, eq = signed_power(q, k_);
    const double sq = std::sqrt(e);
    const double pe = std::pow(e, 0.5 / k_);
    const double u = p / sq, v = q / pe;
    const double du_dp = 1.0 / sq - 0.5 * p / (sq * e) * ep;
    const double du_dq = -0.5 * p / (sq * e) * eq;
    const double dv_dp = -(0.5 / k_) * q / (pe * e) * ep;
    const double dv_dq = 1.0 / pe - (0.5 / k_) * q / (pe * e) * eq;
    const double n = u * u + v * v;
    return {(u * dv_dp - v * du_dp) / n, (u * dv_dq - v * du_dq) / n};
  }

 private:
  double k_;
};

}  // namespace chainlab
